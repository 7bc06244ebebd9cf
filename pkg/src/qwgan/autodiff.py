"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every vector-Jacobian product is itself written in Tensor operations, so
backward passes can be recorded and differentiated again: grad(...,
create_graph=True) supports the gradient-of-gradient needed by the
WGAN gradient penalty.

Supported graph nodes: elementwise arithmetic, matmul, reshape,
transpose, broadcast/sum (adjoint pair), exp/log/tanh/sqrt, leaky ReLU
(piecewise-linear mask), and the im2col/col2im adjoint pair from which
convolution and transposed convolution are composed.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """A float64 array plus the tape edges that produced it."""

    __slots__ = ("data", "requires_grad", "grad", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple = ()

    # -- bookkeeping --------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -ensure_tensor(other))

    def __rsub__(self, other):
        return add(ensure_tensor(other), -self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(ensure_tensor(other), self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        total = tensor_sum(self, axis=axis, keepdims=keepdims)
        count = self.size if axis is None else _axis_count(self.shape, axis)
        return total * (1.0 / count)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes if axes else None)

    @property
    def T(self):
        return transpose(self, None)


def ensure_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _axis_count(shape, axis) -> int:
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    n = 1
    for a in axes:
        n *= shape[a]
    return n


def _make(data: np.ndarray, parents) -> Tensor:
    """Result node: records tape edges only when recording is on and some
    parent participates in differentiation."""
    track = _GRAD_ENABLED and any(p.requires_grad for p, _ in parents)
    out = Tensor(data, requires_grad=track)
    if track:
        out._parents = tuple((p, fn) for p, fn in parents if p.requires_grad)
    return out


# -- broadcasting helper ----------------------------------------------------

def _unbroadcast(g: Tensor, shape: tuple) -> Tensor:
    """Sum g down to `shape`, undoing numpy broadcasting (differentiable)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = tensor_sum(g, axis=tuple(range(extra)))
    kept = tuple(
        i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1
    )
    if kept:
        g = tensor_sum(g, axis=kept, keepdims=True)
    return reshape(g, shape)


# -- primitives -------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = ensure_tensor(a), ensure_tensor(b)
    return _make(
        a.data + b.data,
        [
            (a, lambda g: _unbroadcast(g, a.shape)),
            (b, lambda g: _unbroadcast(g, b.shape)),
        ],
    )


def mul(a, b) -> Tensor:
    a, b = ensure_tensor(a), ensure_tensor(b)
    return _make(
        a.data * b.data,
        [
            (a, lambda g: _unbroadcast(mul(g, b), a.shape)),
            (b, lambda g: _unbroadcast(mul(g, a), b.shape)),
        ],
    )


def div(a, b) -> Tensor:
    a, b = ensure_tensor(a), ensure_tensor(b)
    return _make(
        a.data / b.data,
        [
            (a, lambda g: _unbroadcast(div(g, b), a.shape)),
            (b, lambda g: _unbroadcast(mul(g, div(-a, mul(b, b))), b.shape)),
        ],
    )


def power(a, exponent: float) -> Tensor:
    """a**p for a constant exponent."""
    a = ensure_tensor(a)
    p = float(exponent)
    return _make(
        a.data**p,
        [(a, lambda g: mul(g, mul(power(a, p - 1.0), p)))],
    )


def exp(a) -> Tensor:
    a = ensure_tensor(a)
    out = _make(np.exp(a.data), [(a, lambda g: mul(g, out))])
    return out


def log(a) -> Tensor:
    a = ensure_tensor(a)
    return _make(np.log(a.data), [(a, lambda g: div(g, a))])


def tanh(a) -> Tensor:
    a = ensure_tensor(a)
    out = _make(np.tanh(a.data), [(a, lambda g: mul(g, 1.0 - mul(out, out)))])
    return out


def sqrt(a) -> Tensor:
    a = ensure_tensor(a)
    out = _make(np.sqrt(a.data), [(a, lambda g: div(g, mul(out, 2.0)))])
    return out


def leaky_relu(a, alpha: float = 0.2) -> Tensor:
    """Piecewise-linear activation via a constant slope mask, so the
    second derivative is zero almost everywhere (as in the usual a.e.
    convention)."""
    a = ensure_tensor(a)
    mask = Tensor(np.where(a.data > 0, 1.0, alpha))
    return mul(a, mask)


def relu(a) -> Tensor:
    return leaky_relu(a, 0.0)


def matmul(a, b) -> Tensor:
    a, b = ensure_tensor(a), ensure_tensor(b)
    return _make(
        a.data @ b.data,
        [
            (a, lambda g: matmul(g, transpose(b, None))),
            (b, lambda g: matmul(transpose(a, None), g)),
        ],
    )


def reshape(a, shape: tuple) -> Tensor:
    a = ensure_tensor(a)
    return _make(a.data.reshape(shape), [(a, lambda g: reshape(g, a.shape))])


def transpose(a, axes=None) -> Tensor:
    a = ensure_tensor(a)
    if axes is None:
        inverse = None
    else:
        inverse = tuple(np.argsort(axes))
    return _make(
        a.data.transpose(axes) if axes is not None else a.data.T,
        [(a, lambda g: transpose(g, inverse))],
    )


def broadcast_to(a, shape: tuple) -> Tensor:
    a = ensure_tensor(a)
    return _make(
        np.broadcast_to(a.data, shape).copy(),
        [(a, lambda g: _unbroadcast(g, a.shape))],
    )


def tensor_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = ensure_tensor(a)
    in_shape = a.shape

    if axis is None:
        axes = tuple(range(len(in_shape)))
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(ax % len(in_shape) for ax in axes)

    def vjp(g):
        kept = tuple(
            1 if i in axes else s for i, s in enumerate(in_shape)
        )
        return broadcast_to(reshape(g, kept), in_shape)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), [(a, vjp)])


# -- im2col / col2im adjoint pair -------------------------------------------

def _conv_out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _im2col_data(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    n, c, h, w = x.shape
    oh = _conv_out_size(h, kh, stride, pad)
    ow = _conv_out_size(w, kw, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((c, kh, kw, n, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
            cols[:, i, j] = patch.transpose(1, 0, 2, 3)
    return cols.reshape(c * kh * kw, n * oh * ow)


def _col2im_data(
    cols: np.ndarray, x_shape: tuple, kh: int, kw: int, stride: int, pad: int
) -> np.ndarray:
    n, c, h, w = x_shape
    oh = _conv_out_size(h, kh, stride, pad)
    ow = _conv_out_size(w, kw, stride, pad)
    c6 = cols.reshape(c, kh, kw, n, oh, ow)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += (
                c6[:, i, j].transpose(1, 0, 2, 3)
            )
    return xp[:, :, pad : pad + h, pad : pad + w]


def im2col(x, kh: int, kw: int, stride: int, pad: int) -> Tensor:
    """Sliding-window gather: (N,C,H,W) -> (C*kh*kw, N*oh*ow).  Linear;
    its adjoint is col2im, and vice versa."""
    x = ensure_tensor(x)
    x_shape = x.shape
    return _make(
        _im2col_data(x.data, kh, kw, stride, pad),
        [(x, lambda g: col2im(g, x_shape, kh, kw, stride, pad))],
    )


def col2im(cols, x_shape: tuple, kh: int, kw: int, stride: int, pad: int) -> Tensor:
    """Scatter-add inverse layout of im2col: (C*kh*kw, N*oh*ow) -> (N,C,H,W)."""
    cols = ensure_tensor(cols)
    return _make(
        _col2im_data(cols.data, x_shape, kh, kw, stride, pad),
        [(cols, lambda g: im2col(g, kh, kw, stride, pad))],
    )


# -- convolution composites --------------------------------------------------

def conv2d(x, w, stride: int = 1, pad: int = 0) -> Tensor:
    """x: (N,C,H,W), w: (F,C,kh,kw) -> (N,F,oh,ow)."""
    x, w = ensure_tensor(x), ensure_tensor(w)
    n, c, h, width = x.shape
    f, c2, kh, kw = w.shape
    if c != c2:
        raise ValueError(f"channel mismatch: input {c}, weight {c2}")
    oh = _conv_out_size(h, kh, stride, pad)
    ow = _conv_out_size(width, kw, stride, pad)
    cols = im2col(x, kh, kw, stride, pad)
    out = matmul(reshape(w, (f, c * kh * kw)), cols)
    return transpose(reshape(out, (f, n, oh, ow)), (1, 0, 2, 3))


def conv_transpose2d(y, w, stride: int = 1, pad: int = 0) -> Tensor:
    """y: (N,F,h,w), w: (F,C,kh,kw) -> (N,C,H,W) with H=(h-1)*stride-2*pad+kh.

    Exactly the adjoint of conv2d with the same weight, which is what
    makes it the upsampling mirror of the critic's strided convolutions.
    """
    y, w = ensure_tensor(y), ensure_tensor(w)
    n, f, h, width = y.shape
    f2, c, kh, kw = w.shape
    if f != f2:
        raise ValueError(f"channel mismatch: input {f}, weight {f2}")
    out_h = (h - 1) * stride - 2 * pad + kh
    out_w = (width - 1) * stride - 2 * pad + kw
    ymat = reshape(transpose(y, (1, 0, 2, 3)), (f, n * h * width))
    cols = matmul(transpose(reshape(w, (f, c * kh * kw)), None), ymat)
    return col2im(cols, (n, c, out_h, out_w), kh, kw, stride, pad)


# -- backward pass -----------------------------------------------------------

def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def _backprop(output: Tensor, seed: Tensor) -> dict[int, Tensor]:
    grads: dict[int, Tensor] = {id(output): seed}
    for node in reversed(_topological_order(output)):
        g = grads.get(id(node))
        if g is None:
            continue
        for parent, vjp in node._parents:
            contribution = vjp(g)
            held = grads.get(id(parent))
            grads[id(parent)] = contribution if held is None else add(held, contribution)
    return grads


def grad(output: Tensor, inputs: list[Tensor], create_graph: bool = False) -> list[Tensor]:
    """Gradients of a scalar output w.r.t. each input.

    With create_graph=True the returned tensors are graph nodes and can
    be differentiated again (double backward); otherwise they are
    constants.  Inputs the output does not depend on get zero tensors.
    """
    if output.size != 1:
        raise ValueError("grad expects a scalar output")
    seed = Tensor(np.ones(output.shape))

    def run():
        grads = _backprop(output, seed)
        out = []
        for t in inputs:
            g = grads.get(id(t))
            out.append(g if g is not None else Tensor(np.zeros(t.shape)))
        return out

    if create_graph:
        return run()
    with no_grad():
        return [Tensor(g.data) for g in run()]


def backward(output: Tensor) -> None:
    """Accumulate d(output)/d(leaf) into .grad for every reachable leaf
    tensor with requires_grad=True."""
    if output.size != 1:
        raise ValueError("backward expects a scalar output")
    with no_grad():
        grads = _backprop(output, Tensor(np.ones(output.shape)))
    for node in _topological_order(output):
        if node.requires_grad and not node._parents:
            g = grads.get(id(node))
            if g is None:
                continue
            if node.grad is None:
                node.grad = g.data.copy()
            else:
                node.grad = node.grad + g.data
