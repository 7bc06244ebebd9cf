"""Backend contracts: determinism, noise statistics, counting ledger."""

import numpy as np
import pytest

from qwgan.backends import (
    CallLedger,
    CountedBackend,
    DepolarizingBackend,
    ExactBackend,
    bits_to_latent,
    counted,
)
from qwgan.circuits import (
    Circuit,
    Connectivity,
    GateKind,
    GateOp,
    build_qcbm_ansatz,
    init_params,
)


def zero_circuit(n):
    """n-qubit circuit that leaves |0...0> unchanged (Rx walls at theta=0)."""
    ops = tuple(GateOp(GateKind.RX, (q,), param_slots=(q,)) for q in range(n))
    return Circuit(n, ops, n), np.zeros(n)


class TestExactBackend:
    def test_zero_theta_samples_all_zero(self):
        circ = build_qcbm_ansatz(4, 1, Connectivity.FULL)
        out = ExactBackend().sample(circ, np.zeros(circ.n_params), 50, seed=0)
        assert out == ["0000"] * 50

    def test_deterministic(self):
        circ = build_qcbm_ansatz(3, 1, Connectivity.FULL)
        theta = init_params(circ.n_params, seed=1)
        be = ExactBackend()
        assert be.sample(circ, theta, 100, seed=5) == be.sample(circ, theta, 100, seed=5)

    def test_invalid_shots(self):
        circ, theta = zero_circuit(2)
        with pytest.raises(ValueError):
            ExactBackend().sample(circ, theta, 0, seed=0)

    def test_tv_against_born_probabilities(self):
        from qwgan.simulator import bits_to_index, born_probabilities, simulate

        circ = build_qcbm_ansatz(3, 1, Connectivity.FULL)
        theta = init_params(circ.n_params, seed=2)
        p = born_probabilities(simulate(circ, theta))
        out = ExactBackend().sample(circ, theta, 100_000, seed=3)
        emp = np.zeros(8)
        for s in out:
            emp[bits_to_index(s)] += 1
        emp /= emp.sum()
        assert 0.5 * np.abs(emp - p).sum() < 0.01


class TestDepolarizingBackend:
    def test_p_zero_is_transparent(self):
        circ = build_qcbm_ansatz(3, 1, Connectivity.FULL)
        theta = init_params(circ.n_params, seed=4)
        inner = ExactBackend()
        noisy = DepolarizingBackend(inner, 0.0)
        assert noisy.sample(circ, theta, 200, seed=6) == inner.sample(circ, theta, 200, seed=6)

    def test_half_flip_gives_uniform_bits(self):
        """p=0.5 erases the signal: one-rate 0.5 +- 0.01 over 1e5 bits."""
        circ, theta = zero_circuit(4)
        noisy = DepolarizingBackend(ExactBackend(), 0.5)
        out = noisy.sample(circ, theta, 25_000, seed=7)
        ones = sum(s.count("1") for s in out)
        assert abs(ones / 100_000 - 0.5) < 0.01

    def test_flip_rate_on_zero_source(self):
        """p=0.1 on an all-zero source: per-bit one-rate 0.1 +- 0.01."""
        circ, theta = zero_circuit(4)
        noisy = DepolarizingBackend(ExactBackend(), 0.1)
        out = noisy.sample(circ, theta, 25_000, seed=8)
        ones = sum(s.count("1") for s in out)
        assert abs(ones / 100_000 - 0.1) < 0.01

    def test_deterministic(self):
        circ, theta = zero_circuit(3)
        noisy = DepolarizingBackend(ExactBackend(), 0.2)
        assert noisy.sample(circ, theta, 100, seed=9) == noisy.sample(circ, theta, 100, seed=9)

    def test_p_out_of_range(self):
        with pytest.raises(ValueError):
            DepolarizingBackend(ExactBackend(), -0.01)
        with pytest.raises(ValueError):
            DepolarizingBackend(ExactBackend(), 0.6)


class TestCallLedger:
    def test_counts_every_sample(self):
        circ, theta = zero_circuit(2)
        be, ledger = counted(ExactBackend())
        for _ in range(7):
            be.sample(circ, theta, 10, seed=0)
        assert ledger.total == 7
        assert ledger.optimization == 7
        assert ledger.calibration == 0

    def test_phase_attribution(self):
        circ, theta = zero_circuit(2)
        be, ledger = counted(ExactBackend())
        ledger.set_phase("calibration")
        for _ in range(3):
            be.sample(circ, theta, 10, seed=0)
        ledger.set_phase("optimization")
        for _ in range(4):
            be.sample(circ, theta, 10, seed=0)
        assert ledger.calibration == 3
        assert ledger.optimization == 4
        assert ledger.total == 7

    def test_invalid_phase(self):
        with pytest.raises(ValueError):
            CallLedger().set_phase("warmup")

    def test_locked_ledger_rejects_records(self):
        circ, theta = zero_circuit(2)
        be, ledger = counted(ExactBackend())
        be.sample(circ, theta, 10, seed=0)
        ledger.lock()
        with pytest.raises(RuntimeError):
            be.sample(circ, theta, 10, seed=0)
        assert ledger.total == 1

    def test_counting_is_transparent(self):
        circ = build_qcbm_ansatz(3, 1, Connectivity.FULL)
        theta = init_params(circ.n_params, seed=10)
        inner = ExactBackend()
        be, _ = counted(ExactBackend())
        assert be.sample(circ, theta, 300, seed=11) == inner.sample(circ, theta, 300, seed=11)

    def test_wraps_any_backend(self):
        circ, theta = zero_circuit(3)
        be, ledger = counted(DepolarizingBackend(ExactBackend(), 0.1))
        be.sample(circ, theta, 10, seed=0)
        assert isinstance(be, CountedBackend)
        assert ledger.total == 1


class TestBitsToLatent:
    def test_shape_and_values(self):
        z = bits_to_latent(["010", "111", "000"])
        assert z.shape == (3, 3)
        np.testing.assert_array_equal(z, [[0, 1, 0], [1, 1, 1], [0, 0, 0]])
        assert z.dtype == np.float64
