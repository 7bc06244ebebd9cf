"""Experiment runner: full adversarial training with either latent
source, per-epoch metric logging, run comparison, and multi-seed suites.

Per epoch: optional circuit-parameter update when the schedule fires,
then critic step(s), then a generator step, then an MMD evaluation.
With the sampled-circuit latent in SPSA mode, classical steps draw
latent rows from a pool refreshed by the optimizer's own circuit
executions, so the execution ledger stays exactly at
calibration + cycles * (2N + 1); finite-difference mode samples the
backend live. Runs are bit-reproducible from their config on the exact
backend.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .autodiff import grad, no_grad
from .backends import (
    CallLedger,
    DepolarizingBackend,
    ExactBackend,
    bits_to_latent,
    counted,
)
from .circuits import build_qcbm_ansatz, init_params
from .config import (
    BackendKind,
    LatentSource,
    LipschitzMode,
    QcbmMode,
    TrainConfig,
)
from .data import bernoulli_latent, normalize, synth_dataset
from .metrics import (
    mmd_linear,
    read_metric_log,
    relative_improvement,
    write_metric_log,
)
from .networks import (
    CriticNet,
    GeneratorNet,
    adam_step,
    clip_weights,
    save_checkpoint,
    wgan_gp_losses,
)
from .qcbm_train import (
    finite_diff_gradient,
    gd_update,
    schedule_step,
    spsa_calibrate,
    spsa_run,
)

__all__ = [
    "EpochRecord",
    "RunResult",
    "CompareReport",
    "SuiteReport",
    "run_training",
    "compare_runs",
    "run_suite",
]

# fixed stream tags keeping the run's independent random uses apart
_STREAM_BATCH = 0x7A1
_STREAM_BERNOULLI = 0xB0
_STREAM_LIVE = 0xC0
_STREAM_CYCLE = 0x5E
_STREAM_CALIBRATION = 0xCA
_STREAM_SPSA = 0x5D


@dataclass(frozen=True)
class EpochRecord:
    """One logged epoch."""

    epoch: int
    mmd: float
    loss_d: float
    loss_g: float
    theta_frozen: bool
    executions: int


@dataclass
class RunResult:
    """Everything a finished training run leaves behind."""

    config: TrainConfig
    records: list[EpochRecord]
    log_path: str
    checkpoint_paths: list[str]
    final_checkpoint: str
    theta: np.ndarray | None
    theta_update_epochs: list[int]
    ledger: CallLedger | None
    gen: GeneratorNet
    critic: CriticNet


def _make_backend(config: TrainConfig):
    inner = ExactBackend()
    if config.backend is BackendKind.DEPOLARIZING:
        inner = DepolarizingBackend(inner, config.p_flip)
    return counted(inner)


def run_training(config: TrainConfig, progress=None) -> RunResult:
    """Run one training to completion, writing the metric CSV and
    checkpoints into config.out_dir."""
    os.makedirs(config.out_dir, exist_ok=True)
    dataset = synth_dataset(config.n_images, config.image_size,
                            config.image_size, config.phase, config.seed_data)
    real_all = normalize(dataset)
    gen = GeneratorNet(config.n_z, config.image_size, channels=5,
                       base=config.base, seed=config.seed_init)
    critic = CriticNet(config.image_size, channels=5, base=config.base,
                       seed=config.seed_init)

    use_qcbm = config.latent is LatentSource.QCBM
    qcfg = config.qcbm_config()
    circuit = theta = None
    backend = ledger = None
    if use_qcbm:
        circuit = build_qcbm_ansatz(config.n_z, config.layers, config.connectivity)
        theta = init_params(circuit.n_params, seed=config.seed_init)
        backend, ledger = _make_backend(config)
        ledger.set_phase("optimization")

    rng = np.random.default_rng([config.seed_train, _STREAM_BATCH])
    adam_d: dict = {}
    adam_g: dict = {}
    pool: np.ndarray | None = None      # latent rows from circuit executions
    spsa_scales: tuple[float, float] | None = None
    if not qcfg.spsa.calibrate and qcfg.spsa.a is not None and qcfg.spsa.c is not None:
        spsa_scales = (qcfg.spsa.a, qcfg.spsa.c)

    draw_tag = [0]

    def draw_z(n_rows: int) -> np.ndarray:
        """Latent batch for a classical step or evaluation."""
        nonlocal pool
        draw_tag[0] += 1
        if not use_qcbm:
            return bernoulli_latent(
                config.n_z, n_rows,
                [config.seed_train, _STREAM_BERNOULLI, draw_tag[0]],
            )
        if config.qcbm_mode is QcbmMode.SPSA and pool is not None:
            idx = rng.integers(0, pool.shape[0], size=n_rows)
            return pool[idx]
        bits = backend.sample(circuit, theta, n_rows,
                              [config.seed_train, _STREAM_LIVE, draw_tag[0]])
        return bits_to_latent(bits)

    def sampled_loss(th, seed) -> float:
        """One circuit execution scored by the frozen critic; refreshes
        the SPSA latent pool as a side effect."""
        nonlocal pool
        bits = backend.sample(circuit, np.asarray(th, float), qcfg.n_samples, seed)
        z = bits_to_latent(bits)
        if config.qcbm_mode is QcbmMode.SPSA:
            pool = z
        with no_grad():
            scores = critic.forward(gen.forward(z))
        return -float(np.mean(scores.data))

    def theta_cycle(cycle_index: int) -> None:
        nonlocal theta, spsa_scales
        evals = [0]

        def loss_fn(th):
            # consecutive +/- evaluations share one sampling seed
            seed = [config.seed_train, _STREAM_CYCLE, cycle_index, evals[0] // 2]
            evals[0] += 1
            return sampled_loss(th, seed)

        if config.qcbm_mode is QcbmMode.FINITE_DIFFERENCE:
            g = finite_diff_gradient(loss_fn, theta, qcfg.delta)
            theta = gd_update(theta, g, qcfg.alpha)
            return

        if spsa_scales is None:
            cal_evals = [0]

            def cal_loss(th):
                seed = [config.seed_train, _STREAM_CALIBRATION, cal_evals[0] // 2]
                cal_evals[0] += 1
                return sampled_loss(th, seed)

            ledger.set_phase("calibration")
            spsa_scales = spsa_calibrate(
                cal_loss, theta, n_calls=50,
                seed=[config.seed_train, _STREAM_CALIBRATION],
                c=qcfg.spsa.c if qcfg.spsa.c is not None else 0.1,
                n_iterations=qcfg.spsa.n_iterations,
            )
            ledger.set_phase("optimization")
        a, c = spsa_scales
        theta = spsa_run(
            loss_fn, theta, qcfg.spsa.n_iterations, a, c,
            seed=[config.seed_train, _STREAM_SPSA, cycle_index],
            decay_a=qcfg.spsa.decay_a, decay_c=qcfg.spsa.decay_c,
        )

    eval_n = min(config.n_images, config.eval_batch)
    real_eval01 = (real_all[:eval_n] + 1.0) / 2.0
    ckpt_every = max(1, config.epochs // 20)
    records: list[EpochRecord] = []
    checkpoint_paths: list[str] = []
    theta_update_epochs: list[int] = []
    meta = config.to_flat_dict()

    def write_ckpt(name: str) -> str:
        path = os.path.join(config.out_dir, name)
        save_checkpoint(path, gen, critic, meta=meta, theta=theta)
        return path

    for epoch in range(config.epochs):
        if use_qcbm and schedule_step(epoch, qcfg.update_period, qcfg.freeze_epoch):
            theta_cycle(len(theta_update_epochs))
            theta_update_epochs.append(epoch)

        loss_d = 0.0
        for _ in range(config.critic_steps):
            idx = rng.integers(0, config.n_images, size=config.batch_size)
            z = draw_z(config.batch_size)
            eps = rng.uniform(size=config.batch_size)
            lam = config.lambda_gp \
                if config.lipschitz is LipschitzMode.GRADIENT_PENALTY else 0.0
            c_loss, _ = wgan_gp_losses(critic, gen, real_all[idx], z, lam, eps=eps)
            grads = grad(c_loss, critic.params())
            adam_step(critic.params(), grads, adam_d,
                      lr=config.lr, beta1=config.beta1, beta2=config.beta2)
            if config.lipschitz is LipschitzMode.WEIGHT_CLIP:
                clip_weights(critic, config.clip_c)
            loss_d = float(c_loss.data)

        z = draw_z(config.batch_size)
        g_loss = -(critic.forward(gen.forward(z)).mean())
        grads = grad(g_loss, gen.params())
        adam_step(gen.params(), grads, adam_g,
                  lr=config.lr, beta1=config.beta1, beta2=config.beta2)
        loss_g = float(g_loss.data)

        with no_grad():
            fake_eval = gen.forward(draw_z(eval_n)).data
        mmd = mmd_linear(real_eval01, (fake_eval + 1.0) / 2.0)
        frozen = (not use_qcbm) or epoch >= qcfg.freeze_epoch
        record = EpochRecord(
            epoch=epoch, mmd=mmd, loss_d=loss_d, loss_g=loss_g,
            theta_frozen=frozen,
            executions=ledger.total if ledger is not None else 0,
        )
        records.append(record)
        if progress is not None:
            progress(record)
        if epoch % ckpt_every == 0:
            checkpoint_paths.append(write_ckpt(f"ckpt-{epoch:05d}.ckpt"))

    if ledger is not None:
        ledger.lock()
    final_checkpoint = write_ckpt("final.ckpt")
    log_path = os.path.join(config.out_dir, "metrics.csv")
    write_metric_log(
        log_path,
        [(r.epoch, r.mmd, r.loss_d, r.loss_g, int(r.theta_frozen)) for r in records],
        config=meta,
        executions_total=ledger.total if ledger is not None else None,
    )
    return RunResult(
        config=config, records=records, log_path=log_path,
        checkpoint_paths=checkpoint_paths, final_checkpoint=final_checkpoint,
        theta=theta, theta_update_epochs=theta_update_epochs, ledger=ledger,
        gen=gen, critic=critic,
    )


# --- run comparison ---------------------------------------------------------

@dataclass(frozen=True)
class CompareReport:
    """Tail-mean comparison of a baseline log against a candidate log."""

    tail_mean_baseline: float
    tail_mean_candidate: float
    window: int
    improvement_pct: float

    def lines(self) -> list[str]:
        return [
            f"window={self.window}",
            f"tail_mean_baseline={self.tail_mean_baseline:.9g}",
            f"tail_mean_candidate={self.tail_mean_candidate:.9g}",
            f"improvement_pct={self.improvement_pct:.9g}",
        ]


def _mmd_series(log) -> list[float]:
    if isinstance(log, (str, os.PathLike)):
        rows, _ = read_metric_log(os.fspath(log))
    else:
        rows = list(log)
    return [row["mmd"] for row in rows]


def compare_runs(log_b, log_q, tail_window: int = 100) -> CompareReport:
    """Mean MMD over the final tail_window epochs of each log, and the
    midpoint-relative improvement of the candidate over the baseline."""
    if tail_window < 1:
        raise ValueError("tail_window must be >= 1")
    series_b = _mmd_series(log_b)
    series_q = _mmd_series(log_q)
    for name, series in (("baseline", series_b), ("candidate", series_q)):
        if len(series) < tail_window:
            raise ValueError(
                f"{name} log has {len(series)} rows, needs >= {tail_window}"
            )
    tail_b = float(np.mean(series_b[-tail_window:]))
    tail_q = float(np.mean(series_q[-tail_window:]))
    return CompareReport(
        tail_mean_baseline=tail_b,
        tail_mean_candidate=tail_q,
        window=tail_window,
        improvement_pct=relative_improvement(tail_b, tail_q),
    )


# --- multi-seed suites ------------------------------------------------------

@dataclass
class SuiteReport:
    """Aggregate over per-seed runs (plus baseline twins for the
    sampled-circuit latent)."""

    seeds: list[int]
    log_paths: list[str]
    mmd_mean: np.ndarray
    mmd_std: np.ndarray
    aggregate_path: str
    improvements: list[float] | None
    fraction_positive: float | None


def run_suite(config: TrainConfig, seeds, tail_window: int = 100,
              progress=None) -> SuiteReport:
    """Run the config once per seed (varying init and training seeds).

    When the latent source is the sampled circuit, each seed also runs a
    Bernoulli twin under matched seeds, and the report carries per-seed
    improvement percentages plus the fraction that favor the circuit.
    """
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise ValueError("suite needs at least 2 seeds")
    use_qcbm = config.latent is LatentSource.QCBM

    curves = []
    log_paths = []
    improvements: list[float] | None = [] if use_qcbm else None
    for seed in seeds:
        sub = replace(config, seed_init=seed, seed_train=seed,
                      out_dir=os.path.join(config.out_dir, f"seed-{seed}"))
        result = run_training(sub, progress=progress)
        curves.append([r.mmd for r in result.records])
        log_paths.append(result.log_path)
        if use_qcbm:
            twin = replace(sub, latent=LatentSource.BERNOULLI,
                           out_dir=os.path.join(config.out_dir,
                                                f"seed-{seed}-bernoulli"))
            twin_result = run_training(twin, progress=progress)
            window = min(tail_window, len(result.records))
            report = compare_runs(twin_result.log_path, result.log_path, window)
            improvements.append(report.improvement_pct)

    table = np.asarray(curves, dtype=np.float64)
    mmd_mean = table.mean(axis=0)
    mmd_std = table.std(axis=0)
    aggregate_path = os.path.join(config.out_dir, "aggregate.csv")
    lines = ["epoch,mmd_mean,mmd_std"]
    for epoch in range(table.shape[1]):
        lines.append(
            f"{epoch},{mmd_mean[epoch]:.9g},{mmd_std[epoch]:.9g}"
        )
    os.makedirs(config.out_dir, exist_ok=True)
    with open(aggregate_path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")

    fraction = None
    if improvements is not None:
        fraction = float(np.mean([1.0 if v > 0 else 0.0 for v in improvements]))
    return SuiteReport(
        seeds=seeds, log_paths=log_paths, mmd_mean=mmd_mean, mmd_std=mmd_std,
        aggregate_path=aggregate_path, improvements=improvements,
        fraction_positive=fraction,
    )
