"""Training the circuit parameters against the generator objective.

Two derivative-free optimizers over the sampled loss: central finite
differences (2 evaluations per coordinate) and SPSA (2 per iteration
regardless of dimension, plus one final evaluation), with the epoch
schedule that interleaves circuit updates with classical training and
freezes the circuit after a cutoff epoch.

Loss functions passed in here take the parameter vector only; callers
that want per-pair sampling seeds exploit that the two evaluations of
any +/- pair are consecutive calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backends import SamplerBackend, bits_to_latent
from .circuits import Circuit

__all__ = [
    "SpsaConfig",
    "QcbmTrainConfig",
    "qcbm_generator_loss",
    "finite_diff_gradient",
    "gd_update",
    "spsa_calibrate",
    "spsa_run",
    "schedule_step",
]


@dataclass(frozen=True)
class SpsaConfig:
    """Hyperparameters for the simultaneous-perturbation optimizer."""

    n_iterations: int = 50
    a: float | None = None        # step scale; None means calibrate first
    c: float | None = None        # perturbation scale; None means calibrate
    decay_a: float = 0.602        # step-size decay exponent
    decay_c: float = 0.101        # perturbation decay exponent
    calibrate: bool = True

    def __post_init__(self) -> None:
        if self.n_iterations < 1:
            raise ValueError("spsa n_iterations must be >= 1")
        if self.a is not None and self.a < 0:
            raise ValueError("spsa a must be >= 0")
        if self.c is not None and self.c <= 0:
            raise ValueError("spsa c must be > 0")
        if self.decay_a <= 0 or self.decay_c <= 0:
            raise ValueError("spsa decay exponents must be > 0")


@dataclass(frozen=True)
class QcbmTrainConfig:
    """Schedule and step sizes for circuit-parameter training."""

    alpha: float = 0.016          # gradient-descent learning rate
    delta: float = 0.01           # finite-difference step
    update_period: int = 30       # epochs between circuit updates
    freeze_epoch: int = 100       # first epoch with the circuit frozen
    n_samples: int = 64           # images per loss estimate
    spsa: SpsaConfig = field(default_factory=SpsaConfig)

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.update_period < 1:
            raise ValueError("update_period must be >= 1")
        if self.freeze_epoch < 0:
            raise ValueError("freeze_epoch must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


def qcbm_generator_loss(theta: np.ndarray, backend: SamplerBackend,
                        circuit: Circuit, gen, critic,
                        n_samples: int, seed) -> float:
    """Negative mean critic score of generated images whose latent codes
    are n_samples bitstrings sampled from the circuit at theta.

    Exactly one backend execution; no parameters are updated.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    bitstrings = backend.sample(circuit, np.asarray(theta, float), n_samples, seed)
    z = bits_to_latent(bitstrings)
    scores = critic.forward(gen.forward(z).data)
    return -float(np.mean(scores.data))


def finite_diff_gradient(loss_fn, theta: np.ndarray, delta: float) -> np.ndarray:
    """Central-difference gradient, exactly 2*len(theta) loss calls.

    The + and - evaluations of each coordinate are consecutive calls,
    so a stateful loss_fn can pair its sampling seeds.
    """
    if delta <= 0:
        raise ValueError("delta must be > 0")
    theta = np.asarray(theta, dtype=np.float64)
    g = np.empty_like(theta)
    for i in range(theta.size):
        bumped = theta.copy()
        bumped[i] = theta[i] + delta
        up = loss_fn(bumped)
        bumped[i] = theta[i] - delta
        down = loss_fn(bumped)
        g[i] = (up - down) / (2.0 * delta)
    return g


def gd_update(theta: np.ndarray, g: np.ndarray, alpha: float) -> np.ndarray:
    """One gradient-descent step theta - alpha * g."""
    theta = np.asarray(theta, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if theta.shape != g.shape:
        raise ValueError(f"gradient shape {g.shape} != parameter shape {theta.shape}")
    return theta - alpha * g


_TARGET_FIRST_STEP = 2.0 * np.pi / 10.0


def spsa_calibrate(loss_fn, theta0: np.ndarray, n_calls: int = 50, seed=0,
                   c: float = 0.1, n_iterations: int = 50) -> tuple[float, float]:
    """Estimate SPSA scales (a, c) from exactly n_calls loss evaluations.

    Probes random +/- c perturbations, averages the implied gradient
    magnitude, and sets a so the first step has a target size. The
    stability offset matches the one spsa_run derives from n_iterations.
    """
    if n_calls < 2 or n_calls % 2:
        raise ValueError("n_calls must be a positive even number")
    theta0 = np.asarray(theta0, dtype=np.float64)
    rng = np.random.default_rng(seed)
    big_a = 0.1 * n_iterations

    magnitudes = []
    for _ in range(n_calls // 2):
        delta = rng.integers(0, 2, size=theta0.size) * 2.0 - 1.0
        up = loss_fn(theta0 + c * delta)
        down = loss_fn(theta0 - c * delta)
        magnitudes.append(abs(up - down) / (2.0 * c))
    avg_magnitude = float(np.mean(magnitudes))
    if avg_magnitude <= 0 or not np.isfinite(avg_magnitude):
        avg_magnitude = 1.0  # flat landscape: fall back to unit scale
    a = _TARGET_FIRST_STEP * (1.0 + big_a) ** 0.602 / avg_magnitude
    return float(a), float(c)


def spsa_run(loss_fn, theta0: np.ndarray, n_iterations: int,
             a: float, c: float, seed=0,
             decay_a: float = 0.602, decay_c: float = 0.101) -> np.ndarray:
    """Simultaneous-perturbation descent: 2 loss calls per iteration and
    one final evaluation, 2*n_iterations + 1 in total.
    """
    if n_iterations < 1:
        raise ValueError("n_iterations must be >= 1")
    if c <= 0:
        raise ValueError("c must be > 0")
    theta = np.asarray(theta0, dtype=np.float64).copy()
    rng = np.random.default_rng(seed)
    big_a = 0.1 * n_iterations

    for k in range(n_iterations):
        a_k = a / (k + 1 + big_a) ** decay_a
        c_k = c / (k + 1) ** decay_c
        delta = rng.integers(0, 2, size=theta.size) * 2.0 - 1.0
        up = loss_fn(theta + c_k * delta)
        down = loss_fn(theta - c_k * delta)
        # delta entries are +/-1, so elementwise 1/delta equals delta
        theta -= a_k * (up - down) / (2.0 * c_k) * delta
    loss_fn(theta)  # final evaluation of the settled parameters
    return theta


def schedule_step(epoch: int, m: int, M: int) -> bool:
    """True when the circuit trains this epoch: before the freeze epoch
    M and on the update period m."""
    if m < 1:
        raise ValueError("update period must be >= 1")
    return epoch < M and epoch % m == 0
