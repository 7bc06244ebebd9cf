"""Sampling backends and hardware-call accounting.

The training loop only ever asks a backend for bitstrings, so swapping
the exact simulator for a noisy stub or a counting wrapper requires no
trainer changes.  The counting wrapper mirrors the budget arithmetic of
hardware runs: one ledger increment per circuit execution.
"""

from __future__ import annotations

import threading
from typing import Protocol

import numpy as np

from .circuits import Circuit, NativeCircuit
from .simulator import sample_bitstrings, simulate

# Stream tag separating bit-flip noise from the inner backend's sampling.
_FLIP_STREAM = 0x0F11B


class SamplerBackend(Protocol):
    def sample(
        self,
        circuit: Circuit | NativeCircuit,
        theta: np.ndarray | None,
        shots: int,
        seed: int,
    ) -> list[str]: ...


class ExactBackend:
    """Noiseless statevector simulation with Born-rule sampling."""

    def sample(self, circuit, theta, shots, seed):
        if shots < 1:
            raise ValueError("shots must be >= 1")
        psi = simulate(circuit, theta)
        return sample_bitstrings(psi, shots, seed)


class DepolarizingBackend:
    """Readout-style noise stub: each output bit flips independently
    with probability p_flip."""

    def __init__(self, inner: SamplerBackend, p_flip: float):
        if not 0.0 <= p_flip <= 0.5:
            raise ValueError("p_flip must be in [0, 0.5]")
        self.inner = inner
        self.p_flip = p_flip

    def sample(self, circuit, theta, shots, seed):
        bits = self.inner.sample(circuit, theta, shots, seed)
        arr = np.array([[int(c) for c in s] for s in bits], dtype=np.uint8)
        rng = np.random.default_rng([seed, _FLIP_STREAM])
        flips = rng.random(arr.shape) < self.p_flip
        arr ^= flips.astype(np.uint8)
        return ["".join(str(b) for b in row) for row in arr]


class CallLedger:
    """Monotone counters of circuit executions, split by phase."""

    PHASES = ("calibration", "optimization")

    def __init__(self):
        self.calibration = 0
        self.optimization = 0
        self._phase = "optimization"
        self._locked = False
        self._mutex = threading.Lock()

    @property
    def phase(self) -> str:
        return self._phase

    @property
    def total(self) -> int:
        return self.calibration + self.optimization

    def set_phase(self, phase: str) -> None:
        if phase not in self.PHASES:
            raise ValueError(f"unknown ledger phase {phase!r}")
        self._phase = phase

    def record(self, n: int = 1) -> None:
        with self._mutex:
            if self._locked:
                raise RuntimeError("ledger is locked; no further executions expected")
            if self._phase == "calibration":
                self.calibration += n
            else:
                self.optimization += n

    def lock(self) -> None:
        """Freeze the ledger once a run's budget is fully spent."""
        with self._mutex:
            self._locked = True


class CountedBackend:
    """Transparent wrapper: identical outputs, one ledger tick per sample()."""

    def __init__(self, inner: SamplerBackend, ledger: CallLedger):
        self.inner = inner
        self.ledger = ledger

    def sample(self, circuit, theta, shots, seed):
        self.ledger.record()
        return self.inner.sample(circuit, theta, shots, seed)


def counted(inner: SamplerBackend) -> tuple[CountedBackend, CallLedger]:
    ledger = CallLedger()
    return CountedBackend(inner, ledger), ledger


def bits_to_latent(bitstrings: list[str]) -> np.ndarray:
    """Bitstrings -> float latent matrix of shape (len, n_bits), entries {0, 1}."""
    return np.array([[float(c) for c in s] for s in bitstrings], dtype=np.float64)
