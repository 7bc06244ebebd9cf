"""Command-line entry point.

Subcommands: train, compare, suite, gen-data, sample, transpile.
Successful output is machine-parsable key=value lines on stdout; any
failure prints a single `error: <message>` line to stderr and exits
nonzero.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .circuits import Connectivity, build_qcbm_ansatz, init_params
from .config import (
    load_train_config,
    parse_config_text,
    train_config_from_mapping,
)
from .data import (
    EbsdBatch,
    Phase,
    bernoulli_latent,
    denormalize,
    save_channel_pngs,
    save_dataset,
    synth_dataset,
)
from .harness import compare_runs, run_suite, run_training
from .networks import load_checkpoint
from .simulator import sample_bitstrings, simulate
from .backends import bits_to_latent
from .transpile import (
    decompose_circuit_cnot,
    estimate_runtime,
    gate_counts,
    load_circuit,
    serialize_circuit,
    to_native,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qwgan",
        description="Hybrid quantum-classical image-generation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training from a config file")
    p_train.add_argument("config", help="path to a key=value config file")
    p_train.add_argument("--out", help="override the config's output directory")
    p_train.add_argument("--progress", action="store_true",
                         help="print per-epoch progress to stderr")

    p_cmp = sub.add_parser("compare", help="compare two metric logs")
    p_cmp.add_argument("log_b", help="baseline metric CSV")
    p_cmp.add_argument("log_q", help="candidate metric CSV")
    p_cmp.add_argument("--window", type=int, default=100,
                       help="tail window in epochs (default 100)")

    p_suite = sub.add_parser("suite", help="run a config across several seeds")
    p_suite.add_argument("config", help="path to a key=value config file")
    p_suite.add_argument("--seeds", required=True,
                         help="comma-separated integer seeds")
    p_suite.add_argument("--out", help="override the config's output directory")
    p_suite.add_argument("--window", type=int, default=100)
    p_suite.add_argument("--progress", action="store_true")

    p_gen = sub.add_parser("gen-data", help="write a synthetic dataset")
    p_gen.add_argument("n", type=int, help="number of images")
    p_gen.add_argument("size", type=int, help="square image size")
    p_gen.add_argument("phase", choices=[p.value for p in Phase])
    p_gen.add_argument("out", help="output container path")
    p_gen.add_argument("--seed", type=int, default=0)

    p_sample = sub.add_parser("sample", help="generate images from a checkpoint")
    p_sample.add_argument("checkpoint", help="checkpoint file from a training run")
    p_sample.add_argument("n", type=int, help="number of images")
    p_sample.add_argument("out", help="output container path")
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--png", metavar="DIR",
                          help="also write per-channel PNGs into DIR")

    p_tr = sub.add_parser("transpile", help="rewrite a circuit into other gate sets")
    p_tr.add_argument("circuit",
                      help="circuit file, or ansatz:<qubits>[:layers][:connectivity]")
    group = p_tr.add_mutually_exclusive_group()
    group.add_argument("--native", action="store_true",
                       help="lower to the trapped-ion native gate set")
    group.add_argument("--cnot", action="store_true",
                       help="decompose two-qubit rotations into CNOTs")
    p_tr.add_argument("--theta", metavar="FILE",
                      help="parameter values, one float per line")
    p_tr.add_argument("--theta-seed", type=int, default=None,
                      help="draw parameters from the standard initializer")
    p_tr.add_argument("--out", help="write the circuit here instead of stdout")
    return parser


def _load_config(spec: str):
    """A config-file path, or the name of a shipped preset."""
    if os.path.exists(spec):
        return load_train_config(spec)
    from importlib import resources

    presets = resources.files("qwgan").joinpath("presets")
    ref = presets.joinpath(spec if spec.endswith(".cfg") else spec + ".cfg")
    if ref.is_file():
        return train_config_from_mapping(parse_config_text(ref.read_text()))
    names = sorted(p.name[:-4] for p in presets.iterdir()
                   if p.name.endswith(".cfg"))
    raise ValueError(
        f"no config file or preset named {spec!r}; presets: {', '.join(names)}"
    )


def _cmd_train(args) -> int:
    config = _load_config(args.config)
    if args.out:
        from dataclasses import replace

        config = replace(config, out_dir=args.out)
    progress = None
    if args.progress:
        every = max(1, config.epochs // 20)

        def progress(record):
            if record.epoch % every == 0 or record.epoch == config.epochs - 1:
                print(f"epoch {record.epoch}/{config.epochs} "
                      f"mmd={record.mmd:.6g} loss_d={record.loss_d:.6g} "
                      f"loss_g={record.loss_g:.6g}", file=sys.stderr)

    result = run_training(config, progress=progress)
    print(f"log={result.log_path}")
    print(f"final_checkpoint={result.final_checkpoint}")
    print(f"final_mmd={result.records[-1].mmd:.9g}")
    total = result.ledger.total if result.ledger is not None else 0
    print(f"executions_total={total}")
    return 0


def _cmd_compare(args) -> int:
    report = compare_runs(args.log_b, args.log_q, tail_window=args.window)
    for line in report.lines():
        print(line)
    return 0


def _cmd_suite(args) -> int:
    config = _load_config(args.config)
    if args.out:
        from dataclasses import replace

        config = replace(config, out_dir=args.out)
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    except ValueError:
        raise ValueError(f"bad --seeds value: {args.seeds!r}") from None
    progress = None
    if args.progress:
        def progress(record):
            print(f"epoch {record.epoch} mmd={record.mmd:.6g}", file=sys.stderr)

    report = run_suite(config, seeds, tail_window=args.window, progress=progress)
    print(f"seeds={','.join(str(s) for s in report.seeds)}")
    print(f"aggregate={report.aggregate_path}")
    for seed, path in zip(report.seeds, report.log_paths):
        print(f"log.{seed}={path}")
    if report.improvements is not None:
        for seed, pct in zip(report.seeds, report.improvements):
            print(f"improvement.{seed}={pct:.9g}")
        print(f"fraction_positive={report.fraction_positive:.9g}")
    return 0


def _cmd_gen_data(args) -> int:
    batch = synth_dataset(args.n, args.size, args.size, args.phase, args.seed)
    save_dataset(batch, args.out)
    print(f"out={args.out}")
    print(f"n={len(batch)}")
    print(f"size={batch.height}")
    print(f"phase={batch.phase.value}")
    return 0


def _cmd_sample(args) -> int:
    gen, _, meta, theta = load_checkpoint(args.checkpoint)
    if args.n < 1:
        raise ValueError("n must be >= 1")
    if meta.get("latent") == "qcbm" and theta is not None:
        circuit = build_qcbm_ansatz(
            gen.n_z,
            layers=int(meta.get("layers", "1")),
            connectivity=Connectivity(meta.get("connectivity", "full")),
        )
        psi = simulate(circuit, theta)
        z = bits_to_latent(sample_bitstrings(psi, args.n, seed=args.seed))
    else:
        z = bernoulli_latent(gen.n_z, args.n, seed=args.seed)
    from .autodiff import no_grad

    with no_grad():
        images = denormalize(gen.forward(z).data)
    phase = Phase(meta.get("phase", "ferrite"))
    batch = EbsdBatch(images=images, phase=phase)
    save_dataset(batch, args.out)
    print(f"out={args.out}")
    print(f"n={len(batch)}")
    if args.png:
        os.makedirs(args.png, exist_ok=True)
        for i in range(len(batch)):
            save_channel_pngs(batch[i], args.png, stem=f"sample-{i:04d}")
        print(f"png_dir={args.png}")
    return 0


def _load_cli_circuit(spec: str):
    if spec.startswith("ansatz:"):
        parts = spec.split(":")
        if len(parts) < 2 or len(parts) > 4:
            raise ValueError(f"bad ansatz spec {spec!r}, "
                             "expected ansatz:<qubits>[:layers][:connectivity]")
        try:
            n_qubits = int(parts[1])
            layers = int(parts[2]) if len(parts) > 2 else 1
        except ValueError:
            raise ValueError(f"bad ansatz spec {spec!r}") from None
        conn = Connectivity(parts[3]) if len(parts) > 3 else Connectivity.FULL
        return build_qcbm_ansatz(n_qubits, layers, conn)
    return load_circuit(spec)


def _cmd_transpile(args) -> int:
    circuit = _load_cli_circuit(args.circuit)

    theta = None
    if args.theta is not None:
        values = [float(tok) for tok in open(args.theta).read().split()]
        theta = np.asarray(values, dtype=np.float64)
    elif args.theta_seed is not None:
        theta = init_params(circuit.n_params, seed=args.theta_seed)

    if args.native:
        if theta is None:
            raise ValueError("native lowering needs --theta or --theta-seed")
        out_circuit = to_native(circuit, theta)
    elif args.cnot:
        out_circuit = decompose_circuit_cnot(circuit)
    else:
        out_circuit = circuit

    text = serialize_circuit(out_circuit)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text)
        print(f"out={args.out}")
    else:
        print(text, end="")
    counts = ",".join(f"{kind}:{n}" for kind, n in sorted(gate_counts(out_circuit).items()))
    print(f"gate_counts={counts}", file=sys.stderr)
    print(f"runtime_us={estimate_runtime(out_circuit):.9g}", file=sys.stderr)
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "compare": _cmd_compare,
    "suite": _cmd_suite,
    "gen-data": _cmd_gen_data,
    "sample": _cmd_sample,
    "transpile": _cmd_transpile,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
