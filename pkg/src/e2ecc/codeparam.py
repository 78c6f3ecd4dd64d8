"""Trainable standard-form code.

The real matrix ``omega`` (k x (n-k)) defines ``P = bin(omega)``, hence
``G = [I | P]`` and ``H = [P^T | I]``. Binarization uses the straight-through
estimator so gradients from every use of ``G`` or ``H`` land on ``omega``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .gf2 import Code, as_bits

DEFAULT_INIT_SCALE = 0.01
DEFAULT_CLAMP = 0.5


@dataclass
class OmegaParam:
    omega: Tensor
    c: float = DEFAULT_INIT_SCALE
    clamp_bound: float = DEFAULT_CLAMP
    tau: float = np.inf

    @property
    def k(self) -> int:
        return self.omega.shape[0]

    @property
    def n(self) -> int:
        return self.omega.shape[0] + self.omega.shape[1]

    def bits(self) -> np.ndarray:
        """Current binary ``P`` (no graph)."""
        return (self.omega.data < 0).astype(np.uint8)

    def code(self, name: str = "learned") -> Code:
        return Code(self.bits(), name=name)


def init_omega(omega0, c: float = DEFAULT_INIT_SCALE, clamp_bound: float = DEFAULT_CLAMP,
               tau: float = np.inf) -> OmegaParam:
    """``omega = c * (1 - 2 omega0)``: every entry starts with the same confidence."""
    if c <= 0:
        raise ValueError("init scale c must be positive")
    o0 = as_bits(omega0, "omega0")
    return OmegaParam(Tensor(c * (1.0 - 2.0 * o0), requires_grad=True), c, clamp_bound, tau)


@dataclass
class Realized:
    P: Tensor
    G: Tensor
    H: Tensor


def realize(p: OmegaParam | np.ndarray, tau: float | None = None) -> Realized:
    """Assemble differentiable ``G`` and ``H`` around the shared binarized ``P``.

    Passing a plain binary array instead of an :class:`OmegaParam` gives the
    same views as constants (used for frozen or fixed codes).
    """
    if isinstance(p, OmegaParam):
        P = ad.ste_binarize(p.omega, p.tau if tau is None else tau)
    else:
        P = Tensor(as_bits(p, "P").astype(np.float64))
    k, r = P.shape
    G = ad.concat([Tensor(np.eye(k)), P], axis=1)
    H = ad.concat([P.T, Tensor(np.eye(r))], axis=1)
    return Realized(P, G, H)


def build_mask(H) -> Tensor:
    """Path-count connectivity of the Tanner graph, shape (2n-k, 2n-k).

    Variable-variable block ``H^T H`` and check-check block ``H H^T`` count
    length-two paths (the diagonal holds node degrees); the off-diagonal
    blocks are the adjacency ``H^T`` (variables x checks) and ``H``.
    """
    H = ad.tensor(H)
    Ht = H.T
    top = ad.concat([Ht @ H, Ht], axis=1)
    bottom = ad.concat([H, H @ Ht], axis=1)
    return ad.concat([top, bottom], axis=0)


def clamp(p: OmegaParam) -> None:
    """Project ``omega`` in place into the open interval (-bound, bound)."""
    b = np.nextafter(p.clamp_bound, 0.0)
    np.clip(p.omega.data, -b, b, out=p.omega.data)
