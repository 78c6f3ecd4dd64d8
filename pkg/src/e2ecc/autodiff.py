"""A small define-by-run reverse-mode autodiff over numpy arrays.

Every op builds a :class:`Tensor` whose ``_backward`` closure maps the output
gradient to parent gradients. ``Tensor.backward`` walks the graph once in
reverse topological order. Broadcasting follows numpy; gradients are summed
back to each parent's shape.

Besides the usual primitives the module carries the two custom-gradient
operations that make a GF(2) code trainable: straight-through binarization
and the polarized (sign-product) binary matrix product.
"""
from __future__ import annotations

import contextlib

import numpy as np

_GRAD_ENABLED = True
_SQRT_2_OVER_PI = float(np.sqrt(2.0 / np.pi))


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    # -- introspection ----------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def T(self):
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self):
        return len(self.data)

    # -- operators --------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    # -- backward ---------------------------------------------------------
    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topo_order(self)
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _topo_order(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def leave_one_out_prod(t: np.ndarray, axis: int = -1) -> np.ndarray:
    """Product along ``axis`` of all entries except the one at each position.

    Uses prefix and suffix scans so that zero entries are handled exactly.
    """
    t = np.moveaxis(t, axis, -1)
    ones = np.ones(t.shape[:-1] + (1,), dtype=t.dtype)
    prefix = np.cumprod(np.concatenate([ones, t[..., :-1]], axis=-1), axis=-1)
    suffix = np.cumprod(np.concatenate([ones, t[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return np.moveaxis(prefix * suffix, -1, axis)


# ---------------------------------------------------------------------------
# elementary ops

def add(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b),
                 lambda g: (unbroadcast(g, sa) if a.requires_grad else None,
                            unbroadcast(g, sb) if b.requires_grad else None))


def neg(a) -> Tensor:
    a = tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def sub(a, b) -> Tensor:
    return add(a, neg(b))


def mul(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b),
                 lambda g: (unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
                            unbroadcast(g * ad, bd.shape) if b.requires_grad else None))


def scale(a, c: float) -> Tensor:
    a = tensor(a)
    return _make(a.data * c, (a,), lambda g: (g * c,))


def matmul(a, b) -> Tensor:
    """``a @ b`` with numpy semantics for stacks of matrices (ndim >= 2 on both sides)."""
    a, b = tensor(a), tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2:
        raise ValueError("matmul expects matrices; reshape vectors to (1, k) or (k, 1)")
    if ad.shape[-1] != bd.shape[-2]:
        raise ValueError(f"matmul shape mismatch {ad.shape} @ {bd.shape}")

    def backward(g):
        ga = unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            if bd.ndim == 2 and ad.ndim > 2:
                gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape)
        return ga, gb

    return _make(ad @ bd, (a, b), backward)


def transpose(a, axes=None) -> Tensor:
    """Permute axes; the default swaps the last two."""
    a = tensor(a)
    if axes is None:
        axes = list(range(a.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def astype(a, dtype) -> Tensor:
    """Cast to ``dtype``; gradients are cast back to the source dtype."""
    a = tensor(a)
    if a.dtype == dtype:
        return a
    src = a.dtype
    return _make(a.data.astype(dtype), (a,), lambda g: (g.astype(src),))


def reshape(a, shape) -> Tensor:
    a = tensor(a)
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _make(np.concatenate([t.data for t in ts], axis=axis), ts, backward)


def getitem(a, idx) -> Tensor:
    """Basic slicing (no fancy indexing)."""
    a = tensor(a)
    shape, dtype = a.shape, a.dtype

    def backward(g):
        out = np.zeros(shape, dtype=dtype)
        out[idx] = g
        return (out,)

    return _make(a.data[idx], (a,), backward)


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001 - mirrors numpy
    a = tensor(a)
    shape = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = tensor(a)
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def absolute(a) -> Tensor:
    a = tensor(a)
    s = np.sign(a.data)
    return _make(np.abs(a.data), (a,), lambda g: (g * s,))


def relu(a) -> Tensor:
    a = tensor(a)
    on = a.data > 0
    return _make(np.where(on, a.data, 0.0), (a,), lambda g: (g * on,))


def sigmoid(a) -> Tensor:
    a = tensor(a)
    y = _sigmoid(a.data)
    return _make(y, (a,), lambda g: (g * y * (1.0 - y),))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _gelu_parts(x):
    c = _SQRT_2_OVER_PI
    inner = c * (x + 0.044715 * x * x * x)
    t = np.tanh(inner)
    return t, 0.5 * (1.0 + t)


def _gelu_grad(x, t, cdf):
    c = _SQRT_2_OVER_PI
    return cdf + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3 * 0.044715 * x * x)


def gelu(a) -> Tensor:
    """GELU, tanh form: ``x/2 (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))``."""
    a = tensor(a)
    x = a.data
    t, cdf = _gelu_parts(x)
    return _make(x * cdf, (a,), lambda g: (g * _gelu_grad(x, t, cdf),))


def geglu(a) -> Tensor:
    """Gated unit on the last axis: ``a[..., :w] * gelu(a[..., w:])`` with ``w`` half the width."""
    a = tensor(a)
    w = a.shape[-1] // 2
    if 2 * w != a.shape[-1]:
        raise ValueError("geglu needs an even last dimension")
    lin, gate = a.data[..., :w], a.data[..., w:]
    t, cdf = _gelu_parts(gate)
    act = gate * cdf

    def backward(g):
        out = np.empty_like(a.data)
        out[..., :w] = g * act
        out[..., w:] = g * lin * _gelu_grad(gate, t, cdf)
        return (out,)

    return _make(lin * act, (a,), backward)


def softmax(a, mask=None, scale: float = 1.0) -> Tensor:
    """``softmax(scale * (a + mask))`` over the last axis.

    ``mask`` broadcasts against ``a``; it may be a constant array holding
    ``-inf`` entries (excluded positions) or a Tensor that receives gradient.
    """
    a = tensor(a)
    parents = [a]
    if mask is not None:
        mask = tensor(mask)
        parents.append(mask)
        y = a.data + mask.data.astype(a.dtype, copy=False)
    else:
        y = a.data.copy()
    if scale != 1.0:
        y *= scale
    y -= y.max(axis=-1, keepdims=True)
    np.exp(y, out=y)
    y /= y.sum(axis=-1, keepdims=True)

    def backward(g):
        dz = g - (g * y).sum(axis=-1, keepdims=True)
        dz *= y
        if scale != 1.0:
            dz *= scale
        if mask is None:
            return (dz,)
        return dz, unbroadcast(dz, mask.shape) if mask.requires_grad else None

    return _make(y, parents, backward)


def layer_norm(a, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply learned scale and shift."""
    a, gamma, beta = tensor(a), tensor(gamma), tensor(beta)
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv

    def backward(g):
        dxhat = g * gamma.data
        dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(x.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _make(xhat * gamma.data + beta.data, (a, gamma, beta), backward)


def bce_with_logits(logits, target) -> Tensor:
    """Mean binary cross-entropy between ``sigmoid(logits)`` and ``target``."""
    logits = tensor(logits)
    z = logits.data
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=z.dtype)
    if t.shape != z.shape:
        raise ValueError(f"target shape {t.shape} != logits shape {z.shape}")
    loss = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    n = z.size

    def backward(g):
        return (g * (_sigmoid(z) - t) / n,)

    return _make(np.asarray(loss.mean()), (logits,), backward)


# ---------------------------------------------------------------------------
# custom-gradient binary ops

def ste_binarize(u, tau: float = np.inf) -> Tensor:
    """bin(u): 0 for u >= 0, 1 for u < 0; backward ``-1/2 * 1{|u| <= tau}``."""
    u = tensor(u)
    x = u.data
    gate = -0.5 if np.isinf(tau) else -0.5 * (np.abs(x) <= tau)
    return _make((x < 0).astype(x.dtype), (u,), lambda g: (g * gate,))


def polar_matmul(a, B) -> Tensor:
    """Polarized GF(2) product ``a (.) B`` for {0,1}-valued operands.

    Output ``i`` is ``(1 - prod_j (1 - 2 a_j B_ji)) / 2``: the XOR of the
    selected bits written as a real product of signs, so both operands get
    gradients. ``a`` is ``(..., k)``, ``B`` is ``(k, n)``, the result is
    ``(..., n)``. On binary inputs it equals ``a @ B mod 2`` exactly.
    """
    a, B = tensor(a), tensor(B)
    ad, Bd = a.data, B.data
    if Bd.ndim != 2 or ad.shape[-1] != Bd.shape[0]:
        raise ValueError(f"polar_matmul shape mismatch {ad.shape} . {Bd.shape}")
    f = 1.0 - 2.0 * ad[..., :, None] * Bd
    out = 0.5 * (1.0 - f.prod(axis=-2))

    def backward(g):
        df = -0.5 * g[..., None, :] * leave_one_out_prod(f, axis=-2)
        ga = (df * Bd).sum(axis=-1) * -2.0 if a.requires_grad else None
        gB = None
        if B.requires_grad:
            gB = (df * ad[..., :, None]) * -2.0
            gB = gB.reshape(-1, *Bd.shape).sum(axis=0)
        return ga, gB

    return _make(out, (a, B), backward)


def _check_message(m) -> np.ndarray:
    m = np.asarray(m.data if isinstance(m, Tensor) else m)
    if m.size and not np.isin(m, (0, 1)).all():
        raise ValueError("message must be binary")
    return m.astype(np.float64)


def polar_encode(m, G) -> Tensor:
    """Differentiable encoding ``x = m G`` over GF(2) for a constant binary message."""
    return polar_matmul(Tensor(_check_message(m)), G)


def mod2_ste(a) -> Tensor:
    """``a mod 2`` with straight-through gradient gated by ``1{|a| <= 1}``."""
    a = tensor(a)
    x = a.data
    gate = np.abs(x) <= 1.0
    return _make(np.mod(x, 2.0), (a,), lambda g: (g * gate,))


def modulo_ste_encode(m, G) -> Tensor:
    """Encoding via an ordinary real matmul followed by :func:`mod2_ste`."""
    m = _check_message(m)
    squeeze = m.ndim == 1
    out = mod2_ste(matmul(Tensor(np.atleast_2d(m)), G))
    return out[0] if squeeze else out


# ---------------------------------------------------------------------------
# checking

def finite_diff_check(f, inputs, eps: float = 1e-5, seed: int = 0,
                      max_coords: int | None = None, atol: float = 0.0) -> float:
    """Compare reverse-mode gradients of ``f`` with central differences.

    ``f`` maps Tensors (one per array in ``inputs``) to a Tensor. Non-scalar
    outputs are reduced with a fixed random projection. Returns the maximum
    over checked coordinates of ``|analytic - numeric| / max(|analytic|,
    |numeric|, 1e-12)``. ``max_coords`` caps the coordinates probed per
    input (sampled without replacement). Coordinates where both gradients
    are below ``atol`` count as agreeing; this covers exact zeros (e.g.
    shift-invariant softmax inputs) that the difference quotient only
    resolves to rounding noise.
    """
    rng = np.random.default_rng(seed)
    arrays = [np.array(x, dtype=np.float64) for x in inputs]
    probe = {}

    def scalar(values, track):
        ts = [Tensor(v.copy(), requires_grad=track) for v in values]
        out = f(*ts)
        if out.data.size != 1:
            if "r" not in probe:
                probe["r"] = rng.standard_normal(out.shape)
            out = sum(mul(out, probe["r"]))
        return out, ts

    out, ts = scalar(arrays, True)
    out.backward()
    worst = 0.0
    for i, x in enumerate(arrays):
        analytic = ts[i].grad if ts[i].grad is not None else np.zeros_like(x)
        coords = np.arange(x.size)
        if max_coords is not None and x.size > max_coords:
            coords = rng.choice(x.size, size=max_coords, replace=False)
        with no_grad():
            for c in coords:
                flat = x.reshape(-1)
                orig = flat[c]
                flat[c] = orig + eps
                hi = scalar(arrays, False)[0].item()
                flat[c] = orig - eps
                lo = scalar(arrays, False)[0].item()
                flat[c] = orig
                num = (hi - lo) / (2 * eps)
                ana = analytic.reshape(-1)[c]
                if max(abs(ana), abs(num)) < atol:
                    continue
                err = abs(ana - num) / max(abs(ana), abs(num), 1e-12)
                worst = max(worst, err)
    return worst
