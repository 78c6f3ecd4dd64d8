"""Finite-difference gradient suite over every differentiable primitive.

Each case builds a small random problem in float64 and reports the worst
relative error between reverse-mode and central-difference gradients. The
straight-through operators are checked pointwise against their surrogate
rules instead, since their true derivative is zero almost everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

TOLERANCE = 1e-4
EPS = 1e-5
# rounding floor of a central difference at EPS on O(1) outputs
DECODER_ATOL = 1e-9


@dataclass
class CheckResult:
    name: str
    error: float
    tolerance: float = TOLERANCE

    @property
    def ok(self) -> bool:
        return bool(self.error <= self.tolerance)


def _away_from_zero(rng, shape, lo=0.2, hi=1.5):
    """Random values with magnitude in [lo, hi], keeping clear of kinks."""
    return rng.uniform(lo, hi, shape) * rng.choice([-1.0, 1.0], shape)


def _smooth_cases(rng):
    A = rng.standard_normal((3, 4))
    B = rng.standard_normal((4, 5))
    x = rng.standard_normal((2, 3, 4))
    yield "add", lambda a, b: a + b, [A, rng.standard_normal(4)]
    yield "sub", lambda a, b: a - b, [A, rng.standard_normal((3, 1))]
    yield "mul", lambda a, b: a * b, [A, rng.standard_normal(4)]
    yield "scale", lambda a: ad.scale(a, -2.5), [A]
    yield "matmul", lambda a, b: a @ b, [A, B]
    yield "matmul_batched", lambda a, b: a @ b, [x, B]
    yield "matmul_4d", lambda a, b: a @ b, [rng.standard_normal((2, 2, 3, 4)),
                                            rng.standard_normal((2, 2, 4, 3))]
    yield "transpose", lambda a: ad.transpose(a, (2, 0, 1)) * 1.0, [x]
    yield "reshape", lambda a: ad.reshape(a, (6, 4)) @ Tensor(B), [x]
    yield "concat", lambda a, b: ad.concat([a, b], axis=1), [A, rng.standard_normal((3, 2))]
    yield "slice", lambda a: a[:, 1:3] * a[:, 0:2], [A]
    yield "sum", lambda a: ad.sum(a, axis=1) * ad.sum(a), [A]
    yield "mean", lambda a: ad.mean(a, axis=0), [A]
    yield "absolute", lambda a: ad.absolute(a), [_away_from_zero(rng, (3, 4))]
    yield "relu", lambda a: ad.relu(a), [_away_from_zero(rng, (3, 4))]
    yield "sigmoid", lambda a: ad.sigmoid(a), [A]
    yield "gelu", lambda a: ad.gelu(a), [A]
    yield "geglu", lambda a: ad.geglu(a), [rng.standard_normal((2, 3, 8))]
    mask = np.where(rng.random((4, 4)) < 0.2, -np.inf, 0.0)
    np.fill_diagonal(mask, 0.0)
    yield "softmax", lambda a: ad.softmax(a, scale=0.7), [rng.standard_normal((2, 4, 4))]
    yield "softmax_masked", lambda a, m: ad.softmax(a, mask=m + Tensor(mask)), [
        rng.standard_normal((2, 4, 4)), rng.standard_normal((4, 4))]
    yield "layer_norm", lambda a, g, b: ad.layer_norm(a, g, b), [
        x, rng.uniform(0.5, 1.5, 4), rng.standard_normal(4)]
    target = (rng.random((3, 4)) < 0.5) * 1.0
    yield "bce_with_logits", lambda z: ad.bce_with_logits(z, target), [A]
    yield "polar_matmul", lambda a, b: ad.polar_matmul(a, b), [
        rng.uniform(0.05, 0.95, (3, 5)), rng.uniform(0.05, 0.95, (5, 4))]
    yield "diamond", lambda a: (a * a + ad.sigmoid(a)) * a, [A]


def _decoder_case(rng):
    """Full (15,7), N=1, d=16 decoder, gradients w.r.t. parameters and a real-valued H."""
    from .codes import random_standard_code
    from .model import DecoderModel

    model = DecoderModel(15, 7, N=1, d=16, h=8, seed=1)
    code = random_standard_code(15, 7, rng)
    y = 1.0 - 2.0 * (rng.random((3, 15)) < 0.5) + 0.8 * rng.standard_normal((3, 15))
    names = list(model.params)
    H0 = code.H.astype(np.float64)
    # nudge H off {0,1} so that every entry has a generic gradient
    H0 = np.clip(H0 + rng.uniform(-0.1, 0.1, H0.shape), 0.0, 1.0)

    def f(H, *params):
        for name, p in zip(names, params):
            model.params[name] = p
        return model(y, H)

    inputs = [H0] + [model.params[n].data.copy() for n in names]
    return f, inputs


def surrogate_checks(rng) -> list:
    """Pointwise checks of the straight-through backward rules (exact equality)."""
    out = []
    u = np.array([0.3, -0.2, 0.0, 0.7, -0.7, 2.0])
    g = rng.standard_normal(u.shape)
    for tau in (np.inf, 0.5):
        t = Tensor(u, requires_grad=True)
        y = ad.ste_binarize(t, tau)
        y.backward(g)
        want_fwd = (u < 0).astype(float)
        want_grad = -0.5 * g * (np.abs(u) <= tau)
        err = float(np.abs(y.data - want_fwd).max() + np.abs(t.grad - want_grad).max())
        out.append(CheckResult(f"ste_binarize[tau={tau}]", err, 0.0))
    m = np.array([[1.0, 1.0, 1.0, 0.0]])
    G = Tensor((rng.random((4, 6)) < 0.5) * 1.0, requires_grad=True)
    pre = m @ G.data
    x = ad.modulo_ste_encode(m, G)
    gx = rng.standard_normal(x.shape)
    x.backward(gx)
    want = m.T @ (gx * (np.abs(pre) <= 1))
    err = float(np.abs(x.data - pre % 2).max() + np.abs(G.grad - want).max())
    out.append(CheckResult("modulo_ste_encode", err, 0.0))
    return out


def run_suite(seed: int = 0, include_decoder: bool = True, max_coords: int = 24) -> list:
    rng = np.random.default_rng(seed)
    results = []
    for name, f, inputs in _smooth_cases(rng):
        results.append(CheckResult(name, ad.finite_diff_check(f, inputs, eps=EPS, seed=seed)))
    results.extend(surrogate_checks(rng))
    if include_decoder:
        f, inputs = _decoder_case(rng)
        err = ad.finite_diff_check(f, inputs, eps=EPS, seed=seed, max_coords=max_coords,
                                   atol=DECODER_ATOL)
        results.append(CheckResult("decoder(15,7),N=1,d=16", err))
    return results
