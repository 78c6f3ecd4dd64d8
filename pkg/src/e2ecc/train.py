"""Joint training of the code (omega) and the decoder.

Each minibatch encodes a message with the differentiable generator, sends it
through AWGN at a per-sample Eb/N0, and asks the decoder to predict which
channel outputs had their sign flipped. The loss gradient reaches ``omega``
through the encoder, the syndrome, the attention mask and the output head.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .channel import noise_sigma, noise_target
from .codeparam import OmegaParam, clamp, init_omega, realize
from .gf2 import Code, as_bits
from .model import MASK_MODES, DecoderModel

log = logging.getLogger(__name__)

MESSAGE_MODES = ("all_ones", "random")
ENCODE_MODES = ("polar", "modulo_ste")
METRIC_COLUMNS = ("epoch", "loss", "omega_flips_prev", "omega_flips_init", "h_density")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    n: int = 31
    k: int = 16
    N: int = 2
    d: int = 32
    h: int = 8
    epochs: int = 120
    minibatches_per_epoch: int = 200
    batch_size: int = 256
    lr_start: float = 1e-4
    lr_end: float = 1e-6
    omega_freeze_epoch: int | None = None  # default: 80% of epochs
    omega_lr_scale: float = 1.0
    train_ebno_range_db: tuple = (3.0, 7.0)
    message_mode: str = "all_ones"
    encode_mode: str = "polar"
    mask_mode: str = "code_mask"
    fixed_omega: bool = False
    init_scale: float = 0.01
    clamp_bound: float = 0.5
    tau: float = math.inf
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    dtype: str = "float64"
    seed: int = 0

    def __post_init__(self):
        self.train_ebno_range_db = tuple(float(v) for v in self.train_ebno_range_db)
        self.adam_betas = tuple(float(v) for v in self.adam_betas)
        if self.omega_freeze_epoch is None:
            self.omega_freeze_epoch = (4 * self.epochs) // 5
        self.validate()

    def validate(self):
        if not 0 < self.k < self.n:
            raise ValueError("need 0 < k < n")
        if self.lr_end > self.lr_start:
            raise ValueError("lr_end must not exceed lr_start")
        if not 0 <= self.omega_freeze_epoch <= self.epochs:
            raise ValueError("omega_freeze_epoch must lie in [0, epochs]")
        lo, hi = self.train_ebno_range_db
        if lo > hi:
            raise ValueError("train_ebno_range_db must be (lo, hi) with lo <= hi")
        for value, allowed, name in ((self.message_mode, MESSAGE_MODES, "message_mode"),
                                     (self.encode_mode, ENCODE_MODES, "encode_mode"),
                                     (self.mask_mode, MASK_MODES, "mask_mode")):
            if value not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {value!r}")
        if self.batch_size < 1 or self.minibatches_per_epoch < 1:
            raise ValueError("batch_size and minibatches_per_epoch must be positive")

    @property
    def total_steps(self) -> int:
        return self.epochs * self.minibatches_per_epoch

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["tau"] = "inf" if math.isinf(self.tau) else self.tau
        d["train_ebno_range_db"] = list(self.train_ebno_range_db)
        d["adam_betas"] = list(self.adam_betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig keys: {sorted(unknown)}")
        d = dict(d)
        if "tau" in d:
            d["tau"] = float(d["tau"])
        return cls(**d)


def cosine_lr(step: int, total: int, lr_start: float, lr_end: float) -> float:
    """Cosine decay from ``lr_start`` at step 0 to ``lr_end`` at ``total``; no warmup."""
    if total <= 0:
        return lr_start
    frac = min(step, total) / total
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + math.cos(math.pi * frac))


class Adam:
    """Adam over a name -> Tensor mapping with per-parameter learning-rate scales."""

    def __init__(self, params: dict, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = {k: 0 for k in params}

    def step(self, lr: float, scales: dict | None = None, skip=()):
        for name, p in self.params.items():
            if name in skip or p.grad is None:
                continue
            g = p.grad
            self.t[name] += 1
            t = self.t[name]
            m, v = self.m[name], self.v[name]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1**t)
            vhat = v / (1 - self.b2**t)
            step_lr = lr * (scales or {}).get(name, 1.0)
            p.data -= (step_lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.data.dtype)


@dataclass
class Batch:
    y: Tensor
    target: np.ndarray
    sigma: np.ndarray
    x: np.ndarray


def batch_rng(seed: int, epoch: int, step: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, epoch, step])))


def sample_batch(G, cfg: TrainConfig, epoch: int, step: int) -> Batch:
    """Draw one training batch through the (differentiable) generator ``G``.

    ``y`` keeps its graph back to ``G``; ``target`` is the hard multiplicative
    noise (1 = sign flipped); ``sigma`` is the per-sample noise level.
    """
    rng = batch_rng(cfg.seed, epoch, step)
    B, k, n = cfg.batch_size, cfg.k, cfg.n
    if cfg.message_mode == "all_ones":
        m = np.ones((B, k))
    else:
        m = rng.integers(0, 2, size=(B, k)).astype(np.float64)
    if cfg.encode_mode == "polar":
        x = ad.polar_encode(m, G)
    else:
        x = ad.modulo_ste_encode(m, G)
    lo, hi = cfg.train_ebno_range_db
    ebno = rng.uniform(lo, hi, size=B)
    sigma = noise_sigma(ebno, k, n)
    noise = sigma[:, None] * rng.standard_normal((B, n))
    y = (1.0 - 2.0 * x) + noise
    xb = as_bits(np.rint(x.data))
    return Batch(y, noise_target(y.data, xb), sigma, xb)


@dataclass
class Trainer:
    """Mutable training state: model, code parameter and optimizer."""

    cfg: TrainConfig
    model: DecoderModel
    omega: OmegaParam
    omega0: np.ndarray
    opt: Adam = None
    step_count: int = 0
    epoch: int = 0
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.opt is None:
            params = dict(self.model.params)
            params["omega"] = self.omega.omega
            self.opt = Adam(params, self.cfg.adam_betas, self.cfg.adam_eps)

    @classmethod
    def create(cls, cfg: TrainConfig, omega0=None) -> "Trainer":
        """Fresh state; ``omega0`` defaults to a random binary matrix drawn from the seed."""
        if omega0 is None:
            rng = np.random.default_rng([cfg.seed, 0xC0DE])
            omega0 = rng.integers(0, 2, size=(cfg.k, cfg.n - cfg.k))
        omega0 = as_bits(omega0, "omega0")
        if omega0.shape != (cfg.k, cfg.n - cfg.k):
            raise ValueError(f"omega0 shape {omega0.shape} != {(cfg.k, cfg.n - cfg.k)}")
        model = DecoderModel(cfg.n, cfg.k, cfg.N, cfg.d, cfg.h, cfg.mask_mode,
                             seed=cfg.seed, dtype=cfg.dtype)
        omega = init_omega(omega0, cfg.init_scale, cfg.clamp_bound, cfg.tau)
        return cls(cfg, model, omega, omega0.copy())

    def omega_trainable(self, epoch: int | None = None) -> bool:
        epoch = self.epoch if epoch is None else epoch
        return not self.cfg.fixed_omega and epoch < self.cfg.omega_freeze_epoch

    def code(self, name: str = "learned") -> Code:
        return self.omega.code(name)

    def train_step(self, batch_index: int) -> float:
        """One optimizer step on the minibatch ``(epoch, batch_index)``; returns the loss."""
        cfg = self.cfg
        train_omega = self.omega_trainable()
        self.model.zero_grad()
        self.omega.omega.grad = None
        with_code = realize(self.omega) if train_omega else realize(self.omega.bits())
        batch = sample_batch(with_code.G, cfg, self.epoch, batch_index)
        logits = self.model(batch.y, with_code.H)
        loss = ad.bce_with_logits(logits, batch.target)
        value = loss.item()
        lr = cosine_lr(self.step_count, cfg.total_steps, cfg.lr_start, cfg.lr_end)
        if not np.isfinite(value):
            raise TrainingDiverged(
                f"non-finite loss {value} at epoch {self.epoch} step {batch_index}, lr={lr:.3g}, "
                f"grad norms: {self.grad_norms()}")
        loss.backward()
        skip = () if train_omega else ("omega",)
        self.opt.step(lr, {"omega": cfg.omega_lr_scale}, skip=skip)
        if train_omega:
            clamp(self.omega)
        self.step_count += 1
        return value

    def grad_norms(self) -> dict:
        out = {}
        for name, p in self.opt.params.items():
            if p.grad is not None:
                out[name] = float(np.linalg.norm(p.grad))
        return out

    def run_epoch(self) -> dict:
        prev = self.omega.bits()
        losses = [self.train_step(b) for b in range(self.cfg.minibatches_per_epoch)]
        bits = self.omega.bits()
        self.epoch += 1
        H = self.code().H
        row = dict(epoch=self.epoch, loss=float(np.mean(losses)),
                   omega_flips_prev=int((bits != prev).sum()),
                   omega_flips_init=int((bits != self.omega0).sum()),
                   h_density=float(H.mean()))
        self.history.append(row)
        log.info("epoch %d loss %.5f flips %d/%d density %.3f", row["epoch"], row["loss"],
                 row["omega_flips_prev"], row["omega_flips_init"], row["h_density"])
        return row

    def checkpoint(self) -> "Checkpoint":
        loss = self.history[-1]["loss"] if self.history else float("nan")
        return Checkpoint(self.cfg, self.model, self.omega.omega.data.copy(), self.omega0.copy(),
                          self.epoch, loss, list(self.history))


def fit(cfg: TrainConfig, omega0=None, metrics_path=None, callback=None) -> "Checkpoint":
    """Train for ``cfg.epochs`` epochs; optionally stream per-epoch metrics to CSV."""
    trainer = Trainer.create(cfg, omega0)
    writer = None
    fh = None
    if metrics_path is not None:
        fh = open(metrics_path, "w", newline="")
        writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
        writer.writeheader()
    try:
        for _ in range(cfg.epochs):
            row = trainer.run_epoch()
            if writer:
                writer.writerow({c: _fmt(row[c]) for c in METRIC_COLUMNS})
                fh.flush()
            if callback:
                callback(trainer, row)
    finally:
        if fh:
            fh.close()
    return trainer.checkpoint()


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


# ---------------------------------------------------------------------------
# checkpoints

MAGIC = b"E2ECCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    def __init__(self, found: int, expected: int = FORMAT_VERSION):
        super().__init__(f"checkpoint format version {found} is not supported "
                         f"(this build reads version {expected})")
        self.found = found
        self.expected = expected


@dataclass
class Checkpoint:
    cfg: TrainConfig
    model: DecoderModel
    omega: np.ndarray
    omega0: np.ndarray
    epoch: int
    loss: float
    history: list = field(default_factory=list)

    @property
    def P(self) -> np.ndarray:
        return (self.omega < 0).astype(np.uint8)

    @property
    def H(self) -> np.ndarray:
        return self.code().H

    def code(self, name: str = "learned") -> Code:
        return Code(self.P, name=name)

    def decode(self, y, batch: int = 4096) -> np.ndarray:
        return self.model.decode(y, self.H, batch=batch)

    def save(self, path) -> None:
        save_checkpoint(self, path)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Write ``ckpt`` as: magic, u32 version, u64 header length, JSON header,
    raw little-endian arrays, u32 CRC32 of everything before it."""
    arrays = {f"param/{k}": t.data for k, t in ckpt.model.params.items()}
    arrays["omega"] = ckpt.omega
    arrays["omega0"] = ckpt.omega0
    arrays["H"] = ckpt.H
    index, blobs, offset = {}, [], 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr)
        a = a.astype(a.dtype.newbyteorder("<"), copy=False)
        raw = a.tobytes()
        index[name] = dict(dtype=a.dtype.str, shape=list(a.shape), offset=offset, nbytes=len(raw))
        blobs.append(raw)
        offset += len(raw)
    header = dict(config=ckpt.cfg.to_dict(), model=ckpt.model.config(), epoch=ckpt.epoch,
                  loss=ckpt.loss, history=ckpt.history, arrays=index)
    hbytes = json.dumps(header, sort_keys=True).encode()
    body = MAGIC + struct.pack("<IQ", FORMAT_VERSION, len(hbytes)) + hbytes + b"".join(blobs)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    prefix = len(MAGIC) + 12
    if len(raw) < prefix + 4 or not raw.startswith(MAGIC):
        raise CorruptCheckpointError(f"{path}: not a checkpoint file or truncated header")
    version, hlen = struct.unpack("<IQ", raw[len(MAGIC):prefix])
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(version)
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if len(raw) < prefix + hlen + 4 or zlib.crc32(body) != crc:
        raise CorruptCheckpointError(f"{path}: checksum mismatch (truncated or corrupted)")
    try:
        header = json.loads(body[prefix : prefix + hlen])
    except ValueError as exc:
        raise CorruptCheckpointError(f"{path}: unreadable header") from exc
    data = body[prefix + hlen :]
    arrays = {}
    for name, meta in header["arrays"].items():
        chunk = data[meta["offset"] : meta["offset"] + meta["nbytes"]]
        if len(chunk) != meta["nbytes"]:
            raise CorruptCheckpointError(f"{path}: array {name!r} truncated")
        arrays[name] = np.frombuffer(chunk, dtype=np.dtype(meta["dtype"])).reshape(meta["shape"]).copy()
    cfg = TrainConfig.from_dict(header["config"])
    mc = header["model"]
    model = DecoderModel(mc["n"], mc["k"], mc["N"], mc["d"], mc["h"], mc["mask_mode"],
                         ln_eps=mc["ln_eps"], dtype=mc.get("dtype", "float64"))
    for name, t in model.params.items():
        t.data = arrays[f"param/{name}"].astype(model.dtype, copy=False)
    ckpt = Checkpoint(cfg, model, arrays["omega"], arrays["omega0"], header["epoch"],
                      header["loss"], header.get("history", []))
    if not np.array_equal(ckpt.H, arrays["H"]):
        raise CorruptCheckpointError(f"{path}: stored H does not match omega")
    return ckpt


def metrics_csv(history: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=METRIC_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in history:
        w.writerow({c: _fmt(row[c]) for c in METRIC_COLUMNS})
    return buf.getvalue()
