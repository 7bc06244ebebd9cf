"""Generator/critic pair, the three adversarial losses, Adam, weight
clipping, and bit-exact checkpointing.

Architecture: the generator projects an n_z-bit latent to a seed feature
map and upsamples twice with stride-2 transposed convolutions to a
5-channel image squashed into [-1, 1]; the critic mirrors it with
strided convolutions and an unbounded scalar head.
"""

from __future__ import annotations

import numpy as np

from .autodiff import (
    Tensor,
    conv2d,
    conv_transpose2d,
    ensure_tensor,
    grad,
    leaky_relu,
    reshape,
    sqrt,
    tanh,
)

_LEAK = 0.2
CHECKPOINT_FORMAT = "qwgan-ckpt-1"
NORMALIZATION = "[-1,1]"


def _he(rng: np.random.Generator, shape: tuple, fan_in: int) -> Tensor:
    return Tensor(rng.normal(0.0, np.sqrt(2.0 / fan_in), shape), requires_grad=True)


class GeneratorNet:
    """z (batch, n_z) -> images (batch, channels, image_size, image_size)."""

    def __init__(self, n_z: int, image_size: int = 16, channels: int = 5,
                 base: int = 32, seed: int = 0):
        if image_size % 4 != 0 or image_size < 8:
            raise ValueError("image_size must be a multiple of 4, at least 8")
        self.n_z = n_z
        self.image_size = image_size
        self.channels = channels
        self.base = base
        self.seed_map = image_size // 4
        s4 = self.seed_map
        rng = np.random.default_rng([seed, 0x9E])
        self.w0 = _he(rng, (n_z, 2 * base * s4 * s4), n_z)
        self.b0 = Tensor(np.zeros(2 * base * s4 * s4), requires_grad=True)
        self.w1 = _he(rng, (2 * base, base, 4, 4), 2 * base * 16)
        self.b1 = Tensor(np.zeros(base), requires_grad=True)
        self.w2 = _he(rng, (base, channels, 4, 4), base * 16)
        self.b2 = Tensor(np.zeros(channels), requires_grad=True)

    def named_params(self) -> list[tuple[str, Tensor]]:
        return [("g.w0", self.w0), ("g.b0", self.b0), ("g.w1", self.w1),
                ("g.b1", self.b1), ("g.w2", self.w2), ("g.b2", self.b2)]

    def params(self) -> list[Tensor]:
        return [p for _, p in self.named_params()]

    def forward(self, z) -> Tensor:
        z = ensure_tensor(z)
        if z.ndim != 2 or z.shape[1] != self.n_z:
            raise ValueError(f"latent must be (batch, {self.n_z}), got {z.shape}")
        n = z.shape[0]
        h = leaky_relu(z @ self.w0 + self.b0, _LEAK)
        h = reshape(h, (n, 2 * self.base, self.seed_map, self.seed_map))
        h = conv_transpose2d(h, self.w1, stride=2, pad=1)
        h = leaky_relu(h + reshape(self.b1, (1, self.base, 1, 1)), _LEAK)
        h = conv_transpose2d(h, self.w2, stride=2, pad=1)
        return tanh(h + reshape(self.b2, (1, self.channels, 1, 1)))


class CriticNet:
    """images (batch, channels, image_size, image_size) -> scores (batch,)."""

    def __init__(self, image_size: int = 16, channels: int = 5, base: int = 32,
                 seed: int = 0):
        if image_size % 4 != 0 or image_size < 8:
            raise ValueError("image_size must be a multiple of 4, at least 8")
        self.image_size = image_size
        self.channels = channels
        self.base = base
        self.seed_map = image_size // 4
        s4 = self.seed_map
        rng = np.random.default_rng([seed, 0xD1])
        self.w1 = _he(rng, (base, channels, 4, 4), channels * 16)
        self.b1 = Tensor(np.zeros(base), requires_grad=True)
        self.w2 = _he(rng, (2 * base, base, 4, 4), base * 16)
        self.b2 = Tensor(np.zeros(2 * base), requires_grad=True)
        self.wf = _he(rng, (2 * base * s4 * s4, 1), 2 * base * s4 * s4)
        self.bf = Tensor(np.zeros(1), requires_grad=True)

    def named_params(self) -> list[tuple[str, Tensor]]:
        return [("d.w1", self.w1), ("d.b1", self.b1), ("d.w2", self.w2),
                ("d.b2", self.b2), ("d.wf", self.wf), ("d.bf", self.bf)]

    def params(self) -> list[Tensor]:
        return [p for _, p in self.named_params()]

    def forward(self, x) -> Tensor:
        x = ensure_tensor(x)
        if x.ndim != 4 or x.shape[1:] != (self.channels, self.image_size, self.image_size):
            raise ValueError(
                f"images must be (batch, {self.channels}, {self.image_size}, "
                f"{self.image_size}), got {x.shape}"
            )
        n = x.shape[0]
        h = conv2d(x, self.w1, stride=2, pad=1)
        h = leaky_relu(h + reshape(self.b1, (1, self.base, 1, 1)), _LEAK)
        h = conv2d(h, self.w2, stride=2, pad=1)
        h = leaky_relu(h + reshape(self.b2, (1, 2 * self.base, 1, 1)), _LEAK)
        flat = reshape(h, (n, 2 * self.base * self.seed_map * self.seed_map))
        return reshape(flat @ self.wf + self.bf, (n,))


# --- losses -----------------------------------------------------------------

def gradient_penalty(critic: CriticNet, real, fake, eps) -> Tensor:
    """Mean over the batch of (||grad_xhat D(xhat)||_2 - 1)^2 at the mixture
    xhat = eps*real + (1-eps)*fake, eps per sample."""
    real = real.data if isinstance(real, Tensor) else np.asarray(real, float)
    fake = fake.data if isinstance(fake, Tensor) else np.asarray(fake, float)
    if real.shape != fake.shape:
        raise ValueError(f"shape mismatch: real {real.shape}, fake {fake.shape}")
    eps = np.asarray(eps, dtype=np.float64).reshape(-1, 1, 1, 1)
    if eps.shape[0] != real.shape[0]:
        raise ValueError("one eps draw per sample required")
    x_hat = Tensor(eps * real + (1.0 - eps) * fake, requires_grad=True)
    score_sum = critic.forward(x_hat).sum()
    (g_x,) = grad(score_sum, [x_hat], create_graph=True)
    # 1e-24 keeps the norm differentiable at exactly zero gradient
    norms = sqrt((g_x * g_x).sum(axis=(1, 2, 3)) + 1e-24)
    return ((norms - 1.0) ** 2.0).mean()


def wgan_gp_losses(critic: CriticNet, gen: GeneratorNet, real, z,
                   lam: float = 0.01, eps=None) -> tuple[Tensor, Tensor]:
    """critic_loss = E[D(fake)] - E[D(real)] + lam * penalty;
    generator_loss = -E[D(fake)].  Shares one forward graph."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    real_t = ensure_tensor(real)
    fake = gen.forward(z)
    d_fake = critic.forward(fake)
    d_real = critic.forward(real_t)
    if eps is None:
        eps = np.full(real_t.shape[0], 0.5)
    critic_loss = d_fake.mean() - d_real.mean()
    if lam > 0:
        critic_loss = critic_loss + lam * gradient_penalty(critic, real_t, fake, eps)
    generator_loss = -d_fake.mean()
    return critic_loss, generator_loss


def clip_weights(critic: CriticNet, c: float) -> CriticNet:
    """Project every critic parameter into [-c, c] (the Lipschitz clamp of
    the clipping-mode Wasserstein critic)."""
    if c <= 0:
        raise ValueError("clip range c must be positive")
    for p in critic.params():
        np.clip(p.data, -c, c, out=p.data)
    return critic


# --- optimizer --------------------------------------------------------------

def adam_step(params: list[Tensor], grads, state: dict, lr: float = 1e-4,
              beta1: float = 0.5, beta2: float = 0.9, eps: float = 1e-8) -> dict:
    """One Adam update; state is created on first use and mutated in place."""
    if not state:
        state["t"] = 0
        state["m"] = [np.zeros(p.shape) for p in params]
        state["v"] = [np.zeros(p.shape) for p in params]
    state["t"] += 1
    t = state["t"]
    for i, (p, g) in enumerate(zip(params, grads)):
        g = g.data if isinstance(g, Tensor) else np.asarray(g, float)
        state["m"][i] = beta1 * state["m"][i] + (1 - beta1) * g
        state["v"][i] = beta2 * state["v"][i] + (1 - beta2) * g * g
        m_hat = state["m"][i] / (1 - beta1**t)
        v_hat = state["v"][i] / (1 - beta2**t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return state


# --- checkpoints ------------------------------------------------------------
#
# Single file: ASCII key=value header lines, a blank line, then every
# tensor's float64 little-endian bytes in declaration order.

_CORE_KEYS = ("n_z", "image_size", "channels", "base")


def save_checkpoint(path: str, gen: GeneratorNet, critic: CriticNet,
                    meta: dict | None = None, theta: np.ndarray | None = None) -> None:
    tensors: list[tuple[str, np.ndarray]] = [
        (name, p.data) for name, p in gen.named_params() + critic.named_params()
    ]
    if theta is not None:
        tensors.append(("theta", np.asarray(theta, dtype=np.float64)))

    meta = dict(meta or {})
    lines = [f"format={CHECKPOINT_FORMAT}"]
    core = {"n_z": gen.n_z, "image_size": gen.image_size,
            "channels": gen.channels, "base": gen.base}
    for key in _CORE_KEYS:
        lines.append(f"{key}={core[key]}")
    lines.append(f"normalization={NORMALIZATION}")
    for key in sorted(k for k in meta if k not in _CORE_KEYS and k != "normalization"):
        lines.append(f"{key}={meta[key]}")
    shapes = ";".join(
        f"{name}:{'x'.join(str(d) for d in arr.shape)}" for name, arr in tensors
    )
    lines.append(f"tensors={shapes}")

    payload = b"".join(np.ascontiguousarray(arr, dtype="<f8").tobytes()
                       for _, arr in tensors)
    with open(path, "wb") as fh:
        fh.write("\n".join(lines).encode("ascii") + b"\n\n" + payload)


def load_checkpoint(path: str) -> tuple[GeneratorNet, CriticNet, dict, np.ndarray | None]:
    with open(path, "rb") as fh:
        blob = fh.read()
    split = blob.find(b"\n\n")
    if split < 0:
        raise ValueError("checkpoint has no header/payload separator")
    header, payload = blob[:split].decode("ascii"), blob[split + 2:]

    fields: dict[str, str] = {}
    for line in header.splitlines():
        key, _, value = line.partition("=")
        fields[key] = value
    if fields.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unrecognized checkpoint format {fields.get('format')!r}")

    specs = []
    for entry in fields["tensors"].split(";"):
        name, _, dims = entry.partition(":")
        shape = tuple(int(d) for d in dims.split("x"))
        specs.append((name, shape))
    expected = sum(int(np.prod(s)) for _, s in specs) * 8
    if len(payload) != expected:
        raise ValueError(
            f"checkpoint payload truncated: {len(payload)} bytes, expected {expected}"
        )

    n_z = int(fields["n_z"])
    image_size = int(fields["image_size"])
    channels = int(fields["channels"])
    base = int(fields["base"])
    gen = GeneratorNet(n_z, image_size, channels, base, seed=0)
    critic = CriticNet(image_size, channels, base, seed=0)

    by_name = {name: p for name, p in gen.named_params() + critic.named_params()}
    offset = 0
    theta = None
    for name, shape in specs:
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        arr = arr.reshape(shape).astype(np.float64)
        offset += count * 8
        if name == "theta":
            theta = arr
        else:
            if name not in by_name or by_name[name].shape != shape:
                raise ValueError(f"unexpected tensor {name} of shape {shape}")
            by_name[name].data = arr.copy()

    meta = {k: v for k, v in fields.items() if k not in ("format", "tensors")}
    return gen, critic, meta, theta
