"""Run configuration: the TrainConfig record and the flat key=value
config-file format (one `key=value` per line, `#` comments, unknown
keys rejected). A config plus the exact backend fully determines a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from enum import Enum

from .circuits import Connectivity
from .data import Phase
from .qcbm_train import QcbmTrainConfig, SpsaConfig

__all__ = [
    "LatentSource",
    "BackendKind",
    "LipschitzMode",
    "QcbmMode",
    "TrainConfig",
    "parse_config_text",
    "train_config_from_mapping",
    "load_train_config",
]


class LatentSource(str, Enum):
    BERNOULLI = "bernoulli"
    QCBM = "qcbm"


class BackendKind(str, Enum):
    EXACT = "exact"
    DEPOLARIZING = "depolarizing"
    COUNTED = "counted"     # exact sampling with execution counting


class LipschitzMode(str, Enum):
    GRADIENT_PENALTY = "gp"
    WEIGHT_CLIP = "clip"


class QcbmMode(str, Enum):
    FINITE_DIFFERENCE = "fd"
    SPSA = "spsa"


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines a training run."""

    n_z: int = 12
    image_size: int = 16
    n_images: int = 500
    phase: Phase = Phase.FERRITE
    epochs: int = 400
    batch_size: int = 64
    critic_steps: int = 1
    base: int = 32
    lambda_gp: float = 0.01
    lipschitz: LipschitzMode = LipschitzMode.GRADIENT_PENALTY
    clip_c: float = 0.01
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    latent: LatentSource = LatentSource.BERNOULLI
    qcbm_mode: QcbmMode = QcbmMode.FINITE_DIFFERENCE
    alpha: float = 0.016
    delta: float = 0.01
    update_period: int = 30
    freeze_epoch: int = 100
    n_samples: int = 64
    spsa_iterations: int = 50
    spsa_a: float | None = None
    spsa_c: float | None = None
    spsa_calibrate: bool = True
    connectivity: Connectivity = Connectivity.FULL
    layers: int = 1
    backend: BackendKind = BackendKind.EXACT
    p_flip: float = 0.0
    seed_data: int = 0
    seed_init: int = 1
    seed_train: int = 2
    eval_batch: int = 256
    out_dir: str = "run-out"

    def __post_init__(self) -> None:
        positives = ("n_z", "image_size", "n_images", "epochs", "batch_size",
                     "critic_steps", "base", "layers", "n_samples",
                     "spsa_iterations", "update_period", "eval_batch")
        for name in positives:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.lambda_gp < 0:
            raise ValueError("lambda_gp must be >= 0")
        if self.clip_c <= 0:
            raise ValueError("clip_c must be > 0")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValueError("beta1 and beta2 must be in [0, 1)")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.freeze_epoch < 0:
            raise ValueError("freeze_epoch must be >= 0")
        if not 0 <= self.p_flip <= 0.5:
            raise ValueError("p_flip must be in [0, 0.5]")
        if self.spsa_a is not None and self.spsa_a < 0:
            raise ValueError("spsa_a must be >= 0")
        if self.spsa_c is not None and self.spsa_c <= 0:
            raise ValueError("spsa_c must be > 0")

    def qcbm_config(self) -> QcbmTrainConfig:
        """The circuit-training sub-config assembled from flat fields."""
        return QcbmTrainConfig(
            alpha=self.alpha, delta=self.delta,
            update_period=self.update_period, freeze_epoch=self.freeze_epoch,
            n_samples=self.n_samples,
            spsa=SpsaConfig(n_iterations=self.spsa_iterations,
                            a=self.spsa_a, c=self.spsa_c,
                            calibrate=self.spsa_calibrate),
        )

    def to_flat_dict(self) -> dict[str, str]:
        """All fields as the strings the config-file format uses."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Enum):
                value = value.value
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif value is None:
                value = ""
            out[f.name] = str(value)
        return out


def parse_config_text(text: str) -> dict[str, str]:
    """Flat key=value lines into a string mapping; `#` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"bad config line {lineno}: {raw.strip()!r}")
        out[key.strip()] = value.strip()
    return out


_BOOL_WORDS = {"true": True, "1": True, "yes": True,
               "false": False, "0": False, "no": False}


def _convert(name: str, text: str, kind):
    try:
        if kind is bool:
            word = text.lower()
            if word not in _BOOL_WORDS:
                raise ValueError
            return _BOOL_WORDS[word]
        return kind(text)
    except ValueError:
        raise ValueError(f"config key {name}: bad value {text!r}") from None


_FIELD_KINDS: dict[str, type] = {}
for _f in fields(TrainConfig):
    _FIELD_KINDS[_f.name] = {
        "phase": Phase, "latent": LatentSource, "backend": BackendKind,
        "lipschitz": LipschitzMode, "qcbm_mode": QcbmMode,
        "connectivity": Connectivity,
    }.get(_f.name, type(getattr(TrainConfig, _f.name, None)))
del _f
# fields without a plain-type default
_FIELD_KINDS["spsa_a"] = float
_FIELD_KINDS["spsa_c"] = float
_FIELD_KINDS["spsa_calibrate"] = bool
_FIELD_KINDS["out_dir"] = str


def train_config_from_mapping(mapping: dict[str, str]) -> TrainConfig:
    kwargs = {}
    for key, value in mapping.items():
        if key not in _FIELD_KINDS:
            raise ValueError(f"unknown config key: {key}")
        if value == "" and key in ("spsa_a", "spsa_c"):
            kwargs[key] = None
            continue
        kwargs[key] = _convert(key, value, _FIELD_KINDS[key])
    return TrainConfig(**kwargs)


def load_train_config(path: str) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return train_config_from_mapping(parse_config_text(fh.read()))
