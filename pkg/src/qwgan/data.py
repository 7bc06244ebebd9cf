"""Five-channel microstructure image data: synthetic generation, the
EBSD1 on-disk container, pixel normalization, and latent samplers.

Channel order everywhere: 0 image quality, 1 crystal-structure label
(quantized to {0, 64, 128, 192}), 2 local-misorientation map (high at
region boundaries), 3 orientation-deviation map, 4 binary region mask
({0, 255}).

EBSD1 container layout, little-endian:
    magic "EBSD1" | u32 count | u16 H | u16 W | u8 channels | u8 phase
    | u32 CRC32(payload) | payload: count * channels * H * W raw u8,
channel-major per image.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.ndimage import gaussian_filter

__all__ = [
    "Phase",
    "EbsdImage",
    "EbsdBatch",
    "BadMagicError",
    "TruncatedPayloadError",
    "ChecksumMismatchError",
    "synth_dataset",
    "save_dataset",
    "load_dataset",
    "normalize",
    "denormalize",
    "bernoulli_latent",
    "save_channel_pngs",
]

N_CHANNELS = 5
LABEL_LEVELS = (0, 64, 128, 192)

_MAGIC = b"EBSD1"
_HEADER = struct.Struct("<5sIHHBBI")


class Phase(str, Enum):
    FERRITE = "ferrite"
    BAINITE = "bainite"


class BadMagicError(ValueError):
    """File does not start with the EBSD1 magic."""


class TruncatedPayloadError(ValueError):
    """File ends before the declared pixel data."""


class ChecksumMismatchError(ValueError):
    """Pixel data does not match the stored CRC32."""


@dataclass(frozen=True)
class EbsdImage:
    """One (5, H, W) unsigned-8-bit image."""

    channels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.channels)
        if arr.ndim != 3 or arr.shape[0] != N_CHANNELS:
            raise ValueError(f"expected ({N_CHANNELS}, H, W) channels, got {arr.shape}")
        if arr.dtype != np.uint8:
            raise ValueError(f"channels must be uint8, got {arr.dtype}")

    @property
    def mask(self) -> np.ndarray:
        """Region mask thresholded at 128 into {0, 1}."""
        return (self.channels[4] >= 128).astype(np.uint8)


@dataclass(frozen=True)
class EbsdBatch:
    """A uniform stack of images with a phase label."""

    images: np.ndarray  # (n, 5, H, W) uint8
    phase: Phase

    def __post_init__(self) -> None:
        arr = np.asarray(self.images)
        if arr.ndim != 4 or arr.shape[1] != N_CHANNELS:
            raise ValueError(f"expected (n, {N_CHANNELS}, H, W) images, got {arr.shape}")
        if arr.dtype != np.uint8:
            raise ValueError(f"images must be uint8, got {arr.dtype}")
        if arr.shape[0] < 1:
            raise ValueError("batch is empty")

    def __len__(self) -> int:
        return self.images.shape[0]

    def __getitem__(self, i: int) -> EbsdImage:
        return EbsdImage(self.images[i])

    @property
    def height(self) -> int:
        return self.images.shape[2]

    @property
    def width(self) -> int:
        return self.images.shape[3]


def _scale_to_u8(field: np.ndarray, lo: float = 0.0, hi: float = 255.0) -> np.ndarray:
    span = field.max() - field.min()
    if span < 1e-12:
        return np.full(field.shape, lo, dtype=np.uint8)
    unit = (field - field.min()) / span
    return np.clip(np.round(lo + unit * (hi - lo)), 0, 255).astype(np.uint8)


def _blob_mask(rng: np.random.Generator, size: int, elongation: float) -> np.ndarray:
    """Wobbly ellipse of ones around a jittered center."""
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    cy = size / 2 + rng.uniform(-size / 10, size / 10)
    cx = size / 2 + rng.uniform(-size / 10, size / 10)
    angle = rng.uniform(0, np.pi)
    ry = size * 0.32 / elongation
    rx = size * 0.32 * elongation
    dy, dx = yy - cy, xx - cx
    u = np.cos(angle) * dx + np.sin(angle) * dy
    v = -np.sin(angle) * dx + np.cos(angle) * dy
    theta = np.arctan2(dy, dx)
    wobble = 1.0 + 0.18 * np.sin(3 * theta + rng.uniform(0, 2 * np.pi)) \
        + 0.1 * np.sin(5 * theta + rng.uniform(0, 2 * np.pi))
    r2 = (u / rx) ** 2 + (v / ry) ** 2
    return (r2 <= wobble).astype(np.uint8)


def _label_field(rng: np.random.Generator, mask: np.ndarray) -> np.ndarray:
    """Nearest-seed coloring inside the mask, levels from LABEL_LEVELS[1:]."""
    size = mask.shape[0]
    n_seeds = int(rng.integers(3, 7))
    pts = rng.uniform(0, size, size=(n_seeds, 2))
    levels = rng.choice(LABEL_LEVELS[1:], size=n_seeds)
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    d2 = (yy[..., None] - pts[:, 0]) ** 2 + (xx[..., None] - pts[:, 1]) ** 2
    field = levels[np.argmin(d2, axis=-1)].astype(np.uint8)
    return np.where(mask > 0, field, 0).astype(np.uint8)


def _boundary(mask: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Pixels where the mask or the label field changes between 4-neighbors."""
    edges = np.zeros(mask.shape, dtype=bool)
    for field in (mask.astype(np.int16), labels.astype(np.int16)):
        edges[:-1, :] |= field[:-1, :] != field[1:, :]
        edges[1:, :] |= field[1:, :] != field[:-1, :]
        edges[:, :-1] |= field[:, :-1] != field[:, 1:]
        edges[:, 1:] |= field[:, 1:] != field[:, :-1]
    return edges


def synth_dataset(n: int, height: int, width: int, phase_style, seed) -> EbsdBatch:
    """Procedural grain-like patches, deterministic given the seed.

    The two phase styles differ in blob elongation (bainite laths are
    stretched) and in the spatial frequency of the misorientation
    texture.
    """
    phase = Phase(phase_style)
    if n < 1:
        raise ValueError("n must be >= 1")
    if height != width:
        raise ValueError(f"images must be square, got {height}x{width}")
    if not 8 <= height <= 64:
        raise ValueError(f"size must be in [8, 64], got {height}")

    elongation = 1.1 if phase is Phase.FERRITE else 1.9
    texture_sigma = 1.6 if phase is Phase.FERRITE else 0.7

    rng = np.random.default_rng(seed)
    images = np.empty((n, N_CHANNELS, height, width), dtype=np.uint8)
    for i in range(n):
        mask = _blob_mask(rng, height, elongation)
        labels = _label_field(rng, mask)
        edges = _boundary(mask, labels)

        iq_noise = gaussian_filter(rng.normal(size=mask.shape), sigma=2.0)
        iq = _scale_to_u8(iq_noise, 120, 230) * mask + \
            _scale_to_u8(iq_noise, 10, 60) * (1 - mask)

        kam_noise = gaussian_filter(rng.normal(size=mask.shape), sigma=texture_sigma)
        kam = 0.25 * (_scale_to_u8(kam_noise, 0, 255).astype(float))
        kam = np.where(edges, 200.0 + 0.2 * kam, kam)
        kam = np.clip(np.round(kam * (mask | edges)), 0, 255).astype(np.uint8)

        ks_noise = gaussian_filter(rng.normal(size=mask.shape), sigma=1.2)
        ks = (_scale_to_u8(ks_noise, 30, 200) * mask).astype(np.uint8)

        images[i, 0] = iq
        images[i, 1] = labels
        images[i, 2] = kam
        images[i, 3] = ks
        images[i, 4] = mask * 255
    return EbsdBatch(images=images, phase=phase)


_PHASE_CODES = {Phase.FERRITE: 0, Phase.BAINITE: 1}
_CODE_PHASES = {v: k for k, v in _PHASE_CODES.items()}


def save_dataset(batch: EbsdBatch, path: str) -> None:
    payload = np.ascontiguousarray(batch.images).tobytes()
    header = _HEADER.pack(
        _MAGIC, len(batch), batch.height, batch.width, N_CHANNELS,
        _PHASE_CODES[batch.phase], zlib.crc32(payload) & 0xFFFFFFFF,
    )
    with open(path, "wb") as fh:
        fh.write(header + payload)


def load_dataset(path: str) -> EbsdBatch:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size or blob[:5] != _MAGIC:
        raise BadMagicError(f"not an EBSD1 file: {path}")
    magic, count, height, width, nchan, phase_code, crc = _HEADER.unpack_from(blob)
    if nchan != N_CHANNELS:
        raise ValueError(f"expected {N_CHANNELS} channels, file has {nchan}")
    expected = count * nchan * height * width
    payload = blob[_HEADER.size:]
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"payload has {len(payload)} bytes, header declares {expected}"
        )
    payload = payload[:expected]
    if (zlib.crc32(payload) & 0xFFFFFFFF) != crc:
        raise ChecksumMismatchError("payload checksum does not match header")
    if phase_code not in _CODE_PHASES:
        raise ValueError(f"unknown phase code {phase_code}")
    images = np.frombuffer(payload, dtype=np.uint8).reshape(
        count, nchan, height, width
    ).copy()
    return EbsdBatch(images=images, phase=_CODE_PHASES[phase_code])


def normalize(batch) -> np.ndarray:
    """Map u8 pixels into the network range [-1, 1]: x / 127.5 - 1."""
    images = batch.images if isinstance(batch, EbsdBatch) else np.asarray(batch)
    return images.astype(np.float64) / 127.5 - 1.0


def denormalize(arr: np.ndarray) -> np.ndarray:
    """Inverse of normalize, rounding back onto the u8 lattice."""
    return np.clip(np.round((np.asarray(arr, float) + 1.0) * 127.5), 0, 255) \
        .astype(np.uint8)


def bernoulli_latent(n_z: int, batch: int, seed) -> np.ndarray:
    """(batch, n_z) array of i.i.d. fair bits as floats."""
    if n_z < 1:
        raise ValueError("n_z must be >= 1")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=(batch, n_z)).astype(np.float64)


_CHANNEL_NAMES = ("iq", "label", "kam", "ks", "mask")


def save_channel_pngs(image: EbsdImage, out_dir: str, stem: str = "img") -> list[str]:
    """Write one grayscale PNG per channel; needs Pillow installed."""
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise RuntimeError("PNG export needs Pillow (pip install qwgan[png])") from exc
    import os

    paths = []
    for c, name in enumerate(_CHANNEL_NAMES):
        path = os.path.join(out_dir, f"{stem}-{name}.png")
        Image.fromarray(image.channels[c], mode="L").save(path)
        paths.append(path)
    return paths
