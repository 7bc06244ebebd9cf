"""Command-line interface: every subcommand end to end, the key=value
stdout contract, and the one-line error contract."""

import numpy as np
import pytest

from qwgan.cli import main
from qwgan.data import load_dataset


def lines_to_dict(text):
    out = {}
    for line in text.strip().splitlines():
        key, _, value = line.partition("=")
        out[key] = value
    return out


def write_tiny_config(path, **overrides):
    values = dict(
        n_z=4, image_size=8, n_images=32, epochs=6, batch_size=8, base=8,
        eval_batch=32, update_period=2, freeze_epoch=4, n_samples=8,
        spsa_iterations=3,
    )
    values.update(overrides)
    path.write_text("".join(f"{k}={v}\n" for k, v in values.items()))
    return str(path)


class TestTrain:
    def test_train_and_outputs(self, tmp_path, capsys):
        cfg = write_tiny_config(tmp_path / "run.cfg")
        code = main(["train", cfg, "--out", str(tmp_path / "out")])
        assert code == 0
        out = lines_to_dict(capsys.readouterr().out)
        assert out["log"].endswith("metrics.csv")
        assert out["final_checkpoint"].endswith("final.ckpt")
        float(out["final_mmd"])
        assert out["executions_total"] == "0"

    def test_train_qcbm_reports_executions(self, tmp_path, capsys):
        cfg = write_tiny_config(tmp_path / "run.cfg", latent="qcbm",
                                qcbm_mode="spsa")
        code = main(["train", cfg, "--out", str(tmp_path / "out")])
        assert code == 0
        out = lines_to_dict(capsys.readouterr().out)
        assert int(out["executions_total"]) == 50 + 2 * 7

    def test_progress_lines_on_stderr(self, tmp_path, capsys):
        cfg = write_tiny_config(tmp_path / "run.cfg")
        main(["train", cfg, "--out", str(tmp_path / "out"), "--progress"])
        err = capsys.readouterr().err
        assert "epoch 0/6" in err

    def test_unknown_preset_is_one_line_error(self, tmp_path, capsys):
        code = main(["train", "no-such-preset"])
        assert code == 2
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1
        assert err[0].startswith("error: ")
        assert "presets:" in err[0]

    def test_bad_config_key_is_error(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("not_a_key=1\n")
        code = main(["train", str(path)])
        assert code == 2
        assert "unknown config key" in capsys.readouterr().err


class TestCompare:
    def make_log(self, path, values):
        from qwgan.metrics import write_metric_log

        write_metric_log(str(path),
                         [(i, v, 0.0, 0.0, 1) for i, v in enumerate(values)])
        return str(path)

    def test_compare_output(self, tmp_path, capsys):
        log_b = self.make_log(tmp_path / "b.csv", [9.0, 3.0, 3.0])
        log_q = self.make_log(tmp_path / "q.csv", [9.0, 1.0, 1.0])
        code = main(["compare", log_b, log_q, "--window", "2"])
        assert code == 0
        out = lines_to_dict(capsys.readouterr().out)
        assert out["window"] == "2"
        np.testing.assert_allclose(float(out["improvement_pct"]), 100.0)
        np.testing.assert_allclose(float(out["tail_mean_baseline"]), 3.0)

    def test_short_log_error(self, tmp_path, capsys):
        log_b = self.make_log(tmp_path / "b.csv", [1.0])
        log_q = self.make_log(tmp_path / "q.csv", [1.0, 2.0])
        code = main(["compare", log_b, log_q, "--window", "2"])
        assert code == 2
        assert capsys.readouterr().err.startswith("error: ")

    def test_missing_file_error(self, tmp_path, capsys):
        code = main(["compare", str(tmp_path / "nope.csv"),
                     str(tmp_path / "nope2.csv")])
        assert code == 2
        assert capsys.readouterr().err.startswith("error: ")


class TestSuite:
    def test_two_seed_suite(self, tmp_path, capsys):
        cfg = write_tiny_config(tmp_path / "run.cfg", epochs=4)
        code = main(["suite", cfg, "--seeds", "1,2", "--window", "2",
                     "--out", str(tmp_path / "s")])
        assert code == 0
        out = lines_to_dict(capsys.readouterr().out)
        assert out["seeds"] == "1,2"
        assert out["aggregate"].endswith("aggregate.csv")
        assert "log.1" in out and "log.2" in out

    def test_bad_seeds_error(self, tmp_path, capsys):
        cfg = write_tiny_config(tmp_path / "run.cfg")
        code = main(["suite", cfg, "--seeds", "1,x"])
        assert code == 2
        assert "bad --seeds" in capsys.readouterr().err

    def test_single_seed_error(self, tmp_path, capsys):
        cfg = write_tiny_config(tmp_path / "run.cfg")
        code = main(["suite", cfg, "--seeds", "1",
                     "--out", str(tmp_path / "s")])
        assert code == 2
        assert "2 seeds" in capsys.readouterr().err


class TestGenData:
    def test_writes_loadable_container(self, tmp_path, capsys):
        out_path = tmp_path / "d.ebsd"
        code = main(["gen-data", "7", "16", "bainite", str(out_path),
                     "--seed", "5"])
        assert code == 0
        out = lines_to_dict(capsys.readouterr().out)
        assert out["n"] == "7" and out["phase"] == "bainite"
        batch = load_dataset(str(out_path))
        assert batch.images.shape == (7, 5, 16, 16)

    def test_deterministic_across_calls(self, tmp_path, capsys):
        a, b = tmp_path / "a.ebsd", tmp_path / "b.ebsd"
        main(["gen-data", "3", "8", "ferrite", str(a), "--seed", "9"])
        main(["gen-data", "3", "8", "ferrite", str(b), "--seed", "9"])
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_bad_size_error(self, tmp_path, capsys):
        code = main(["gen-data", "3", "100", "ferrite",
                     str(tmp_path / "x.ebsd")])
        assert code == 2
        assert capsys.readouterr().err.startswith("error: ")


class TestSample:
    def _train(self, tmp_path, capsys, **overrides):
        cfg = write_tiny_config(tmp_path / "run.cfg", **overrides)
        main(["train", cfg, "--out", str(tmp_path / "out")])
        out = lines_to_dict(capsys.readouterr().out)
        return out["final_checkpoint"]

    def test_sample_bernoulli_checkpoint(self, tmp_path, capsys):
        ckpt = self._train(tmp_path, capsys)
        out_path = tmp_path / "gen.ebsd"
        code = main(["sample", ckpt, "6", str(out_path), "--seed", "1"])
        assert code == 0
        out = lines_to_dict(capsys.readouterr().out)
        assert out["n"] == "6"
        batch = load_dataset(str(out_path))
        assert batch.images.shape == (6, 5, 8, 8)

    def test_sample_qcbm_checkpoint_uses_theta(self, tmp_path, capsys):
        ckpt = self._train(tmp_path, capsys, latent="qcbm", qcbm_mode="spsa")
        out_path = tmp_path / "gen.ebsd"
        code = main(["sample", ckpt, "4", str(out_path)])
        assert code == 0
        batch = load_dataset(str(out_path))
        assert batch.images.shape == (4, 5, 8, 8)

    def test_sample_png_export(self, tmp_path, capsys):
        pytest.importorskip("PIL")
        ckpt = self._train(tmp_path, capsys)
        png_dir = tmp_path / "pngs"
        code = main(["sample", ckpt, "2", str(tmp_path / "g.ebsd"),
                     "--png", str(png_dir)])
        assert code == 0
        assert len(list(png_dir.glob("*.png"))) == 10

    def test_sample_determinism(self, tmp_path, capsys):
        ckpt = self._train(tmp_path, capsys)
        a, b = tmp_path / "a.ebsd", tmp_path / "b.ebsd"
        main(["sample", ckpt, "3", str(a), "--seed", "4"])
        main(["sample", ckpt, "3", str(b), "--seed", "4"])
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_missing_checkpoint_error(self, tmp_path, capsys):
        code = main(["sample", str(tmp_path / "nope.ckpt"), "2",
                     str(tmp_path / "x.ebsd")])
        assert code == 2
        assert capsys.readouterr().err.startswith("error: ")


class TestTranspile:
    def test_ansatz_to_stdout(self, capsys):
        code = main(["transpile", "ansatz:4"])
        assert code == 0
        captured = capsys.readouterr()
        assert captured.out.startswith("qubits=4 params=22")
        assert "gate_counts=" in captured.err
        assert "runtime_us=" in captured.err

    def test_cnot_decomposition_counts(self, capsys):
        code = main(["transpile", "ansatz:4", "--cnot"])
        assert code == 0
        captured = capsys.readouterr()
        assert "CNOT:12" in captured.err  # 6 entanglers, 2 CNOTs each

    def test_native_lowering_with_seed(self, capsys):
        code = main(["transpile", "ansatz:4:1:reduced", "--native",
                     "--theta-seed", "0"])
        assert code == 0
        captured = capsys.readouterr()
        assert "MS:" in captured.err
        assert captured.out.startswith("qubits=4 params=0")

    def test_native_without_theta_is_error(self, capsys):
        code = main(["transpile", "ansatz:3", "--native"])
        assert code == 2
        assert "needs --theta" in capsys.readouterr().err

    def test_theta_file_and_out_file(self, tmp_path, capsys):
        from qwgan.circuits import build_qcbm_ansatz, init_params

        n_params = build_qcbm_ansatz(3).n_params
        theta_path = tmp_path / "theta.txt"
        theta_path.write_text(
            "\n".join(str(v) for v in init_params(n_params, 0)))
        out_path = tmp_path / "native.circ"
        code = main(["transpile", "ansatz:3", "--native",
                     "--theta", str(theta_path), "--out", str(out_path)])
        assert code == 0
        out = lines_to_dict(capsys.readouterr().out)
        assert out["out"] == str(out_path)
        from qwgan.transpile import load_circuit

        native = load_circuit(str(out_path))
        assert native.n_qubits == 3

    def test_file_round_trip_through_cli(self, tmp_path, capsys):
        from qwgan.circuits import build_qcbm_ansatz
        from qwgan.transpile import save_circuit

        path = tmp_path / "c.circ"
        save_circuit(build_qcbm_ansatz(3), str(path))
        code = main(["transpile", str(path)])
        assert code == 0
        assert capsys.readouterr().out.startswith("qubits=3")

    def test_bad_ansatz_spec_error(self, capsys):
        code = main(["transpile", "ansatz:three"])
        assert code == 2
        assert "bad ansatz spec" in capsys.readouterr().err
