"""Minimal reverse-mode automatic differentiation over numpy arrays.

Implements exactly the operations the toy networks need: dense layers,
3x3/1x1 convolutions, nearest-neighbour upsampling, pointwise
nonlinearities, and scalar reductions. The tape is rebuilt on every
forward pass; dtype follows the wrapped arrays, so the same graph runs
in float32 for speed or float64 for finite-difference verification.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Var:
    """Node in the autodiff tape wrapping an ndarray value.

    ``needs_grad`` marks leaves whose gradient is wanted; it propagates
    to every node derived from them, and backward skips subgraphs that
    do not need it (e.g. frozen decoder weights during latent
    optimization).
    """

    __slots__ = ("data", "grad", "needs_grad", "_parents", "_backward")

    def __init__(self, data, needs_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.needs_grad = needs_grad or any(p.needs_grad for p in parents)
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every needs_grad node."""
        if self.data.shape != ():
            raise ValueError("backward() requires a scalar output")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in seen:
                continue
            if expanded:
                seen.add(id(node))
                order.append(node)
            else:
                stack.append((node, True))
                for p in node._parents:
                    if id(p) not in seen and p.needs_grad:
                        stack.append((p, False))
        self.grad = np.ones((), dtype=self.data.dtype)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not parent.needs_grad:
                    continue
                if parent.grad is None:
                    parent.grad = g.copy() if g.base is not None else g
                else:
                    parent.grad = parent.grad + g

    # -- pointwise arithmetic ------------------------------------------------

    def __add__(self, other):
        other = as_var(other, self.dtype)
        out_data = self.data + other.data
        a_shape, b_shape = self.data.shape, other.data.shape
        return Var(out_data, parents=(self, other),
                   backward=lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)))

    __radd__ = __add__

    def __mul__(self, other):
        other = as_var(other, self.dtype)
        a, b = self, other
        return Var(a.data * b.data, parents=(a, b),
                   backward=lambda g: (_unbroadcast(g * b.data, a.data.shape),
                                       _unbroadcast(g * a.data, b.data.shape)))

    __rmul__ = __mul__

    def __sub__(self, other):
        other = as_var(other, self.dtype)
        a_shape, b_shape = self.data.shape, other.data.shape
        return Var(self.data - other.data, parents=(self, other),
                   backward=lambda g: (_unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)))

    def __rsub__(self, other):
        return as_var(other, self.dtype) - self

    def __neg__(self):
        return Var(-self.data, parents=(self,), backward=lambda g: (-g,))

    def __truediv__(self, scalar):
        if isinstance(scalar, Var):
            raise TypeError("division only supported by python scalars")
        inv = 1.0 / scalar
        return Var(self.data * inv, parents=(self,), backward=lambda g: (g * inv,))

    def __matmul__(self, other):
        a, b = self, other
        return Var(a.data @ b.data, parents=(a, b),
                   backward=lambda g: (g @ b.data.T, a.data.T @ g))

    def reshape(self, *shape):
        old = self.data.shape
        return Var(self.data.reshape(*shape), parents=(self,),
                   backward=lambda g: (g.reshape(old),))


def as_var(x, dtype=None) -> Var:
    if isinstance(x, Var):
        return x
    return Var(np.asarray(x, dtype=dtype))


# -- nonlinearities ----------------------------------------------------------

def leaky_relu(x: Var, slope: float = 0.2) -> Var:
    mask = x.data >= 0
    out = np.where(mask, x.data, x.data * slope)
    return Var(out, parents=(x,),
               backward=lambda g: (np.where(mask, g, g * slope),))


def sigmoid(x: Var) -> Var:
    # saturated tails overflow exp harmlessly (1/(1+inf) == 0)
    with np.errstate(over="ignore"):
        s = 1.0 / (1.0 + np.exp(-x.data))
    return Var(s, parents=(x,), backward=lambda g: (g * s * (1.0 - s),))


def softplus(x: Var) -> Var:
    # log(1 + exp(x)) computed stably for large |x|
    d = x.data
    out = np.maximum(d, 0) + np.log1p(np.exp(-np.abs(d)))
    with np.errstate(over="ignore"):
        sig = 1.0 / (1.0 + np.exp(-d))
    return Var(out, parents=(x,), backward=lambda g: (g * sig,))


def sqrt(x: Var) -> Var:
    r = np.sqrt(x.data)
    return Var(r, parents=(x,), backward=lambda g: (g * (0.5 / r),))


# -- reductions --------------------------------------------------------------

def vsum(x: Var) -> Var:
    shape, dt = x.data.shape, x.data.dtype
    return Var(x.data.sum(), parents=(x,),
               backward=lambda g: (np.broadcast_to(g, shape).astype(dt, copy=False),))


def vmean(x: Var) -> Var:
    n = x.data.size
    shape, dt = x.data.shape, x.data.dtype
    return Var(x.data.mean(), parents=(x,),
               backward=lambda g: ((np.broadcast_to(g, shape) / n).astype(dt, copy=False),))


# -- structural ops ----------------------------------------------------------

def tile_batch(x: Var, n: int) -> Var:
    """Broadcast a (...) tensor to (n, ...) along a new leading axis."""
    out = np.broadcast_to(x.data, (n,) + x.data.shape).copy()
    return Var(out, parents=(x,), backward=lambda g: (g.sum(axis=0),))


def upsample2x(x: Var) -> Var:
    """Nearest-neighbour 2x upsampling of (N, C, H, W)."""
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def bwd(g):
        n, c, h2, w2 = g.shape
        return (g.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5)),)

    return Var(out, parents=(x,), backward=bwd)


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    n, c = xp.shape[:2]
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride]
    return cols.reshape(n, c * kh * kw, ho * wo)


def _col2im(dcols: np.ndarray, xp_shape, kh: int, kw: int, stride: int,
            ho: int, wo: int) -> np.ndarray:
    n, c = xp_shape[:2]
    dxp = np.zeros(xp_shape, dtype=dcols.dtype)
    d6 = dcols.reshape(n, c, kh, kw, ho, wo)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += d6[:, :, i, j]
    return dxp


def conv2d(x: Var, w: Var, b: Var | None, stride: int = 1, pad: int = 1) -> Var:
    """2-D convolution of (N, C, H, W) with (F, C, kh, kw)."""
    n, c, h, wd = x.data.shape
    f, _, kh, kw = w.data.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    cols = _im2col(xp, kh, kw, stride, ho, wo)            # (N, C*kh*kw, Ho*Wo)
    wmat = w.data.reshape(f, -1)
    out = np.matmul(wmat, cols)                           # (N, F, Ho*Wo)
    if b is not None:
        out += b.data[None, :, None]
    out = out.reshape(n, f, ho, wo)
    xp_shape = xp.shape

    def bwd(g):
        gm = g.reshape(n, f, ho * wo)
        dw = dx = db = None
        if w.needs_grad:
            # per-sample GEMMs avoid materializing a transposed copy of cols
            dw = gm[0] @ cols[0].T
            for i in range(1, n):
                dw += gm[i] @ cols[i].T
            dw = dw.reshape(w.data.shape)
        if b is not None and b.needs_grad:
            db = gm.sum(axis=(0, 2))
        if x.needs_grad:
            dcols = np.matmul(wmat.T, gm)                 # (N, C*kh*kw, Ho*Wo)
            dxp = _col2im(dcols, xp_shape, kh, kw, stride, ho, wo)
            dx = dxp[:, :, pad:pad + h, pad:pad + wd] if pad else dxp
        return (dx, dw) if b is None else (dx, dw, db)

    parents = (x, w) if b is None else (x, w, b)
    return Var(out, parents=parents, backward=bwd)


def linear(x: Var, w: Var, b: Var | None) -> Var:
    """Affine map of (N, Din) by weight (Dout, Din) plus bias (Dout,)."""
    out = x.data @ w.data.T
    if b is not None:
        out = out + b.data

    def bwd(g):
        dx = g @ w.data if x.needs_grad else None
        dw = g.T @ x.data if w.needs_grad else None
        if b is None:
            return dx, dw
        db = g.sum(axis=0) if b.needs_grad else None
        return dx, dw, db

    parents = (x, w) if b is None else (x, w, b)
    return Var(out, parents=parents, backward=bwd)


# -- parameter bookkeeping ---------------------------------------------------

class ParamTape:
    """Wraps parameter arrays into graph leaves and collects their gradients.

    A fresh tape is used per optimization step; after ``loss.backward()``
    the accumulated gradients are read through :meth:`grads`.
    """

    def __init__(self):
        self._leaves: dict[str, Var] = {}

    def leaf(self, name: str, arr: np.ndarray) -> Var:
        v = self._leaves.get(name)
        if v is None:
            v = Var(arr, needs_grad=True)
            self._leaves[name] = v
        return v

    def grads(self) -> dict[str, np.ndarray]:
        return {name: v.grad for name, v in self._leaves.items() if v.grad is not None}


class Adam:
    """Adaptive-moment estimation over a named set of parameter arrays.

    Updates happen in place so the owning module sees them immediately.
    """

    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.b1 ** self.t
        bc2 = 1.0 - self.b2 ** self.t
        for name, g in grads.items():
            p = self.params[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * (g * g)
            mh = m / bc1
            vh = v / bc2
            p -= (self.lr * mh / (np.sqrt(vh) + self.eps)).astype(p.dtype, copy=False)
