"""Transformer decoder with a learned, code-derived attention mask.

The input sequence has ``2n - k`` tokens: ``n`` magnitude tokens ``|y_i| W_m``
and ``n - k`` syndrome tokens (``W_0`` or ``W_1``). Each layer adds
``psi(g(H))`` to the attention scores, where ``g`` counts Tanner-graph paths
and ``psi`` is a small per-layer network applied elementwise. The output head
mixes variable tokens with check tokens routed back through ``H^T``; its
output is one logit per bit, positive meaning "channel flipped this sign".
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .channel import hard_bits
from .codeparam import build_mask

MASK_MODES = ("code_mask", "trainable_mask_v2", "code_mask_stop_gradient")
PSI_HIDDEN = 50


class DecoderModel:
    """Parameters live in ``self.params`` (name -> Tensor), in a fixed order."""

    def __init__(self, n: int, k: int, N: int = 2, d: int = 32, h: int = 8,
                 mask_mode: str = "code_mask", seed: int = 0, ln_eps: float = 1e-5,
                 dtype="float64"):
        if d % h:
            raise ValueError(f"embedding dim {d} not divisible by {h} heads")
        if mask_mode not in MASK_MODES:
            raise ValueError(f"mask_mode must be one of {MASK_MODES}")
        if not 0 < k < n:
            raise ValueError("need 0 < k < n")
        self.n, self.k, self.N, self.d, self.h = n, k, N, d, h
        self.mask_mode = mask_mode
        self.ln_eps = ln_eps
        self.dtype = np.dtype(dtype)
        self.params = self._init_params(np.random.default_rng(seed))

    @property
    def T(self) -> int:
        return 2 * self.n - self.k

    def _init_params(self, rng):
        d, T = self.d, self.T
        p = {}

        def lin(name, fan_in, fan_out, gain=1.0):
            p[name + ".w"] = rng.normal(0.0, gain / np.sqrt(fan_in), (fan_in, fan_out))
            p[name + ".b"] = np.zeros(fan_out)

        p["W_m"] = rng.normal(0.0, 0.5, d)
        p["W_0"] = rng.normal(0.0, 0.5, d)
        p["W_1"] = rng.normal(0.0, 0.5, d)
        for l in range(self.N):
            pre = f"layer{l}."
            p[pre + "ln1.g"], p[pre + "ln1.b"] = np.ones(d), np.zeros(d)
            for name in "qkv":
                lin(pre + "att." + name, d, d)
            lin(pre + "att.o", d, d, gain=1.0 / np.sqrt(2 * self.N))
            p[pre + "ln2.g"], p[pre + "ln2.b"] = np.ones(d), np.zeros(d)
            lin(pre + "ff.in", d, 8 * d)
            lin(pre + "ff.out", 4 * d, d, gain=1.0 / np.sqrt(2 * self.N))
            if self.mask_mode == "trainable_mask_v2":
                p[pre + "mask_v2"] = np.zeros((T, T))
            else:
                p[pre + "psi.w1"] = rng.normal(0.0, 0.5, (1, PSI_HIDDEN))
                p[pre + "psi.b1"] = rng.normal(0.0, 0.5, PSI_HIDDEN)
                p[pre + "psi.w2"] = rng.normal(0.0, 0.5 / np.sqrt(PSI_HIDDEN), (PSI_HIDDEN, 1))
                p[pre + "psi.b2"] = np.zeros(1)
        p["ln_f.g"], p["ln_f.b"] = np.ones(d), np.zeros(d)
        p["W_M"] = rng.normal(0.0, 1.0 / np.sqrt(d), (d, d))
        p["W_S"] = rng.normal(0.0, 1.0 / np.sqrt(d), (d, d))
        p["W_out"] = rng.normal(0.0, 1.0 / np.sqrt(d), (d, 1))
        return {name: Tensor(np.asarray(v, dtype=self.dtype), requires_grad=True, name=name)
                for name, v in p.items()}

    def num_parameters(self) -> int:
        return int(np.sum([t.data.size for t in self.params.values()]))

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def config(self) -> dict:
        return dict(n=self.n, k=self.k, N=self.N, d=self.d, h=self.h,
                    mask_mode=self.mask_mode, ln_eps=self.ln_eps, dtype=self.dtype.name)

    # ------------------------------------------------------------------
    def psi(self, layer: int, counts) -> Tensor:
        """Elementwise map path-count -> additive score, 1 -> 50 -> 1 with ReLU."""
        p, pre = self.params, f"layer{layer}.psi."
        counts = ad.tensor(counts)
        shape = counts.shape
        z = ad.reshape(counts, (-1, 1)) @ p[pre + "w1"] + p[pre + "b1"]
        z = ad.relu(z) @ p[pre + "w2"] + p[pre + "b2"]
        return ad.reshape(z, shape)

    def attention_masks(self, H) -> list:
        """Per-layer additive masks (before the diagonal exclusion)."""
        if self.mask_mode == "trainable_mask_v2":
            return [self.params[f"layer{l}.mask_v2"] for l in range(self.N)]
        if self.mask_mode == "code_mask_stop_gradient":
            H = Tensor(ad.tensor(H).data)
        g = build_mask(H)
        return [self.psi(l, g) for l in range(self.N)]

    def frozen_masks(self, H) -> list:
        """Additive masks as fixed arrays (diagonal already excluded), for inference."""
        with ad.no_grad():
            H = np.asarray(ad.tensor(H).data, dtype=self.dtype)
            return [(m.data + _diag_exclusion(self.T)).astype(self.dtype)
                    for m in self.attention_masks(H)]

    # ------------------------------------------------------------------
    def embed(self, y_abs, s) -> Tensor:
        """Initial tokens: ``|y_i| W_m`` then ``W_0`` / ``W_1`` per syndrome bit."""
        p = self.params
        y_abs, s = ad.tensor(y_abs), ad.tensor(s)
        mag = ad.reshape(y_abs, y_abs.shape + (1,)) * p["W_m"]
        syn = ad.reshape(s, s.shape + (1,)) * (p["W_1"] - p["W_0"]) + p["W_0"]
        return ad.concat([mag, syn], axis=-2)

    def attention(self, layer: int, x: Tensor, mask) -> Tensor:
        p, pre = self.params, f"layer{layer}.att."
        B, T, d = x.shape
        h, dh = self.h, d // self.h

        def proj(name):
            return ad.reshape(x @ p[pre + name + ".w"] + p[pre + name + ".b"], (B, T, h, dh))

        q = ad.transpose(proj("q"), (0, 2, 1, 3))
        kT = ad.transpose(proj("k"), (0, 2, 3, 1))
        v = ad.transpose(proj("v"), (0, 2, 1, 3))
        att = ad.softmax(q @ kT, mask=mask, scale=1.0 / np.sqrt(dh))
        out = ad.reshape(ad.transpose(att @ v, (0, 2, 1, 3)), (B, T, d))
        return out @ p[pre + "o.w"] + p[pre + "o.b"]

    def feed_forward(self, layer: int, x: Tensor) -> Tensor:
        p, pre = self.params, f"layer{layer}.ff."
        u = x @ p[pre + "in.w"] + p[pre + "in.b"]
        return ad.geglu(u) @ p[pre + "out.w"] + p[pre + "out.b"]

    def forward(self, y, H, masks=None) -> Tensor:
        """Noise logits for channel outputs ``y`` (batch, n).

        ``H`` is the (n-k, n) parity-check view (a Tensor to let gradients
        reach the code, or a plain array). ``y`` may itself be a Tensor that
        depends on the code through the encoder. ``masks`` optionally
        supplies precomputed additive masks from :meth:`frozen_masks`.
        """
        y = ad.astype(ad.tensor(y), self.dtype)
        if y.ndim == 1:
            y = ad.reshape(y, (1, -1))
        return self.forward_parts(ad.absolute(y), ad.ste_binarize(y), H, masks)

    __call__ = forward

    def forward_parts(self, y_abs, y_bits, H, masks=None) -> Tensor:
        """Forward pass from the two preprocessed inputs ``|y|`` and ``bin(y)``.

        Lets the trainer route code gradients into each input separately.
        """
        p = self.params
        y_abs = ad.astype(ad.tensor(y_abs), self.dtype)
        y_bits = ad.astype(ad.tensor(y_bits), self.dtype)
        if y_abs.shape[-1] != self.n or y_bits.shape != y_abs.shape:
            raise ValueError(f"input shapes {y_abs.shape}, {y_bits.shape} do not match n={self.n}")
        H = ad.astype(ad.tensor(H), self.dtype)
        if H.shape != (self.n - self.k, self.n):
            raise ValueError(f"H shape {H.shape} != {(self.n - self.k, self.n)}")

        s = ad.polar_matmul(y_bits, H.T)
        x = self.embed(y_abs, s)
        if masks is None:
            diag = _diag_exclusion(self.T)
            masks = [m + diag for m in self.attention_masks(H)]
        for l in range(self.N):
            a = ad.layer_norm(x, p[f"layer{l}.ln1.g"], p[f"layer{l}.ln1.b"], self.ln_eps)
            x = x + self.attention(l, a, masks[l])
            a = ad.layer_norm(x, p[f"layer{l}.ln2.g"], p[f"layer{l}.ln2.b"], self.ln_eps)
            x = x + self.feed_forward(l, a)
        x = ad.layer_norm(x, p["ln_f.g"], p["ln_f.b"], self.ln_eps)
        n = self.n
        phi_m, phi_s = x[:, :n, :], x[:, n:, :]
        mixed = phi_m @ p["W_M"] + H.T @ (phi_s @ p["W_S"])
        return ad.reshape(mixed @ p["W_out"], (x.shape[0], n))

    def decode(self, y, H, masks=None, batch: int = 4096) -> np.ndarray:
        """Hard codeword estimates for a batch of channel outputs, no graph."""
        y = np.atleast_2d(np.asarray(y, dtype=self.dtype))
        H = np.asarray(H, dtype=self.dtype)
        if masks is None:
            masks = self.frozen_masks(H)
        out = np.empty(y.shape, dtype=np.uint8)
        with ad.no_grad():
            for s in range(0, len(y), batch):
                logits = self.forward(y[s : s + batch], H, masks).data
                out[s : s + batch] = hard_output(logits, y[s : s + batch])
        return out


def _diag_exclusion(T: int) -> np.ndarray:
    m = np.zeros((T, T))
    np.fill_diagonal(m, -np.inf)
    return m


def hard_output(logits, y) -> np.ndarray:
    """Codeword estimate: flip ``bin(y)`` wherever a sign flip is predicted (logit > 0)."""
    logits = np.asarray(logits)
    y = np.asarray(y)
    if logits.shape != y.shape:
        raise ValueError("logits and y must have the same shape")
    return hard_bits(y) ^ (logits > 0).astype(np.uint8)
