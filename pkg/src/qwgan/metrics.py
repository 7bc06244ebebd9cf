"""Image-quality scoring and the training metric log.

Maximum mean discrepancy under the linear kernel k(x, y) = x . y, which
collapses to mean-vector geometry: the biased estimator is exactly
||mean(real) - mean(gen)||^2, and the unbiased one removes the diagonal
self-similarity terms (and may legitimately dip below zero). Scores
expect pixel values in [0, 1].

The metric log is CSV with a pinned header, 9-significant-digit floats,
and `# key=value` comment lines for run configuration and totals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MmdReport",
    "mmd_linear",
    "relative_improvement",
    "rolling_mean",
    "METRIC_LOG_HEADER",
    "write_metric_log",
    "read_metric_log",
]

_FLOOR = -1e-9


@dataclass(frozen=True)
class MmdReport:
    """One scored comparison: the estimate and what produced it."""

    score: float
    n_real: int
    n_gen: int
    kernel: str = "linear"
    unbiased: bool = True

    def __post_init__(self) -> None:
        if self.n_real < 1 or self.n_gen < 1:
            raise ValueError("batch sizes must be >= 1")
        # The biased estimator is a squared norm; only numerical noise
        # may take it below zero. The unbiased one has no such floor.
        if not self.unbiased and self.score < _FLOOR:
            raise ValueError(f"biased score {self.score} below numerical floor")


def _as_batch(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim > 2:
        arr = arr.reshape(arr.shape[0], -1)
    if arr.size == 0:
        raise ValueError(f"{name} batch is empty")
    if np.min(arr) < -1e-9 or np.max(arr) > 1.0 + 1e-9:
        raise ValueError(f"{name} batch has values outside [0, 1]")
    return arr


def mmd_linear(real, gen, unbiased: bool = True) -> float:
    """Two-sample MMD estimate with kernel k(x, y) = x . y.

    Batches are (n, d) arrays (higher-rank input is flattened per
    sample) with values in [0, 1]. The unbiased estimator excludes
    i = j terms and needs at least 2 samples per batch.
    """
    x = _as_batch(real, "real")
    y = _as_batch(gen, "gen")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"vector lengths differ: {x.shape[1]} vs {y.shape[1]}")

    m, n = x.shape[0], y.shape[0]
    mu_x = x.mean(axis=0)
    mu_y = y.mean(axis=0)
    cross = -2.0 * float(mu_x @ mu_y)
    if not unbiased:
        return float(mu_x @ mu_x) + float(mu_y @ mu_y) + cross

    if m < 2 or n < 2:
        raise ValueError("unbiased estimator needs >= 2 samples per batch")
    # sum over i != j of x_i . x_j = m^2 ||mu||^2 - sum_i ||x_i||^2
    s_xx = (m * m * float(mu_x @ mu_x) - float(np.sum(x * x))) / (m * (m - 1))
    s_yy = (n * n * float(mu_y @ mu_y) - float(np.sum(y * y))) / (n * (n - 1))
    return s_xx + s_yy + cross


def relative_improvement(mmd_b: float, mmd_q: float) -> float:
    """Percent improvement of score mmd_q over baseline mmd_b, relative
    to their midpoint: 100 * (b - q) / ((b + q) / 2).

    Antisymmetric under swapping the arguments; bounded in (-200, 200)
    for positive inputs.
    """
    if mmd_b <= 0 or mmd_q <= 0:
        raise ValueError("relative improvement needs positive scores")
    return 100.0 * (mmd_b - mmd_q) / (0.5 * (mmd_b + mmd_q))


def rolling_mean(series, window: int) -> np.ndarray:
    """Trailing mean of the last `window` points, length-preserving;
    the first window-1 entries average whatever is available."""
    if window < 1:
        raise ValueError("window must be >= 1")
    s = np.asarray(series, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError("series must be one-dimensional")
    csum = np.concatenate([[0.0], np.cumsum(s)])
    out = np.empty_like(s)
    for i in range(s.size):
        lo = max(0, i + 1 - window)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out


# --- metric log -------------------------------------------------------------

METRIC_LOG_HEADER = "epoch,mmd,loss_d,loss_g,theta_frozen"


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def write_metric_log(path: str, rows, config: dict | None = None,
                     executions_total: int | None = None) -> None:
    """Write the metric CSV: config comments, pinned header, one row per
    epoch, and an optional trailing executions-total comment.

    Rows are (epoch, mmd, loss_d, loss_g, theta_frozen) tuples.
    """
    lines = []
    for key in sorted(config or {}):
        lines.append(f"# {key}={(config or {})[key]}")
    lines.append(METRIC_LOG_HEADER)
    for epoch, mmd, loss_d, loss_g, frozen in rows:
        lines.append(
            f"{int(epoch)},{_fmt(mmd)},{_fmt(loss_d)},{_fmt(loss_g)},{int(frozen)}"
        )
    if executions_total is not None:
        lines.append(f"# executions_total={int(executions_total)}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_metric_log(path: str) -> tuple[list[dict], dict[str, str]]:
    """Read a metric CSV back: (rows, meta) where rows are typed dicts
    and meta collects every `# key=value` comment."""
    rows: list[dict] = []
    meta: dict[str, str] = {}
    header_seen = False
    with open(path, "r", encoding="ascii") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            if not header_seen:
                if line != METRIC_LOG_HEADER:
                    raise ValueError(f"bad metric log header: {line!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ValueError(f"bad metric log row: {line!r}")
            rows.append({
                "epoch": int(parts[0]),
                "mmd": float(parts[1]),
                "loss_d": float(parts[2]),
                "loss_g": float(parts[3]),
                "theta_frozen": int(parts[4]),
            })
    if not header_seen:
        raise ValueError("metric log has no header")
    return rows, meta
