import math
import struct

import numpy as np
import pytest

from e2ecc import autodiff as ad
from e2ecc.train import (FORMAT_VERSION, MAGIC, Adam, CheckpointVersionError,
                         CorruptCheckpointError, TrainConfig, Trainer, TrainingDiverged,
                         cosine_lr, fit, load_checkpoint, metrics_csv, sample_batch,
                         save_checkpoint)
from e2ecc.codeparam import realize


def tiny(**kw):
    base = dict(n=15, k=7, N=1, d=16, epochs=2, minibatches_per_epoch=3, batch_size=16,
                lr_start=1e-3, lr_end=1e-5, seed=0)
    base.update(kw)
    return TrainConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        tiny(lr_start=1e-5, lr_end=1e-3)
    with pytest.raises(ValueError):
        tiny(omega_freeze_epoch=5)
    with pytest.raises(ValueError):
        tiny(mask_mode="bad")
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"bogus": 1})
    assert TrainConfig().omega_freeze_epoch == 96
    cfg = tiny()
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


def test_cosine_schedule():
    assert cosine_lr(0, 100, 1e-4, 1e-6) == pytest.approx(1e-4)
    assert cosine_lr(100, 100, 1e-4, 1e-6) == pytest.approx(1e-6)
    assert cosine_lr(50, 100, 1e-4, 1e-6) == pytest.approx(0.5 * (1e-4 + 1e-6))
    lrs = [cosine_lr(s, 100, 1e-4, 1e-6) for s in range(101)]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_adam_first_step_is_lr_sign():
    p = ad.Tensor(np.array([1.0, -2.0]), requires_grad=True)
    opt = Adam({"p": p})
    p.grad = np.array([0.3, -5.0])
    opt.step(0.1)
    assert np.allclose(p.data, [0.9, -1.9])


def test_sample_batch_shapes_and_zero_noise():
    cfg = tiny(fixed_omega=True, train_ebno_range_db=(200.0, 200.0))
    G = realize(np.zeros((7, 8), np.uint8)).G
    b = sample_batch(G, cfg, 0, 0)
    assert b.y.shape == (16, 15) and b.target.shape == (16, 15) and b.sigma.shape == (16,)
    assert not b.target.any()
    assert np.array_equal(b.x, np.tile([1] * 7 + [0] * 8, (16, 1)))


def test_sample_batch_random_messages():
    cfg = tiny(message_mode="random")
    G = realize(np.ones((7, 8), np.uint8)).G
    b = sample_batch(G, cfg, 0, 0)
    assert 0 < b.x[:, :7].mean() < 1
    assert np.array_equal(sample_batch(G, cfg, 0, 0).y.data, b.y.data)
    assert not np.array_equal(sample_batch(G, cfg, 0, 1).y.data, b.y.data)


def test_overfit_fixed_batch():
    tr = Trainer.create(tiny(batch_size=64, minibatches_per_epoch=200, epochs=1, lr_end=1e-3))
    losses = [tr.train_step(0) for _ in range(200)]
    assert losses[-1] <= 0.5 * losses[0]


def test_omega_frozen_after_freeze_epoch():
    cfg = tiny(epochs=4, omega_freeze_epoch=1, lr_start=0.05, lr_end=0.05, init_scale=0.001)
    tr = Trainer.create(cfg)
    tr.run_epoch()
    frozen = tr.omega.bits().copy()
    for _ in range(3):
        tr.train_step(0)
        assert tr.omega.omega.grad is None
    tr.run_epoch()
    assert np.array_equal(tr.omega.bits(), frozen)


def test_fixed_omega_keeps_code():
    cfg = tiny(fixed_omega=True, lr_start=0.05, lr_end=0.05)
    tr = Trainer.create(cfg)
    start = tr.omega.omega.data.copy()
    tr.run_epoch()
    assert np.array_equal(tr.omega.omega.data, start)


def test_omega_stays_clamped():
    tr = Trainer.create(tiny(lr_start=0.3, lr_end=0.3))
    for s in range(5):
        tr.train_step(s)
        assert np.abs(tr.omega.omega.data).max() < 0.5


def test_nonfinite_loss_aborts():
    tr = Trainer.create(tiny())
    tr.model.params["W_out"].data[:] = np.nan
    with pytest.raises(TrainingDiverged, match="grad norms"):
        tr.train_step(0)


@pytest.mark.parametrize("mode", ["trainable_mask_v2", "code_mask_stop_gradient"])
def test_ablation_modes_train(mode):
    ck = fit(tiny(mask_mode=mode, encode_mode="modulo_ste", message_mode="random"))
    assert math.isfinite(ck.loss)


def test_fit_zero_epochs_returns_initial():
    ck = fit(tiny(epochs=0))
    assert ck.epoch == 0 and ck.history == []


def test_metrics_csv(tmp_path):
    path = tmp_path / "m.csv"
    ck = fit(tiny(epochs=3), metrics_path=path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "epoch,loss,omega_flips_prev,omega_flips_init,h_density"
    assert len(lines) == 4
    assert all(0 <= row["h_density"] <= 1 for row in ck.history)
    assert metrics_csv(ck.history) == path.read_text()


def test_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    fit(tiny(), metrics_path=a)
    fit(tiny(), metrics_path=b)
    assert a.read_bytes() == b.read_bytes()


def test_logits_stay_finite_over_many_steps():
    tr = Trainer.create(tiny(batch_size=8, minibatches_per_epoch=1000, epochs=1))
    for s in range(1000):
        assert math.isfinite(tr.train_step(s))
    y = np.random.default_rng(0).standard_normal((8, 15))
    assert np.isfinite(tr.model(y, tr.code().H).data).all()


# -- checkpoints ------------------------------------------------------------

@pytest.fixture
def ckpt():
    return fit(tiny())


def test_checkpoint_roundtrip(ckpt, tmp_path):
    path = tmp_path / "c.ckpt"
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    y = np.random.default_rng(0).standard_normal((6, 15))
    assert np.array_equal(ckpt.model(y, ckpt.H).data, back.model(y, back.H).data)
    assert back.cfg == ckpt.cfg and back.epoch == ckpt.epoch
    assert np.array_equal(back.omega, ckpt.omega) and np.array_equal(back.H, ckpt.H)


def test_checkpoint_truncated(ckpt, tmp_path):
    path = tmp_path / "c.ckpt"
    save_checkpoint(ckpt, path)
    raw = path.read_bytes()
    for cut in (10, len(raw) // 2, len(raw) - 1):
        path.write_bytes(raw[:cut])
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)


def test_checkpoint_bit_flip(ckpt, tmp_path):
    path = tmp_path / "c.ckpt"
    save_checkpoint(ckpt, path)
    raw = bytearray(path.read_bytes())
    raw[-100] ^= 0x10
    path.write_bytes(bytes(raw))
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path)


def test_checkpoint_old_version(ckpt, tmp_path):
    path = tmp_path / "c.ckpt"
    save_checkpoint(ckpt, path)
    raw = bytearray(path.read_bytes())
    raw[len(MAGIC):len(MAGIC) + 4] = struct.pack("<I", 0)
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointVersionError, match=f"version 0.*version {FORMAT_VERSION}"):
        load_checkpoint(path)


def test_not_a_checkpoint(tmp_path):
    path = tmp_path / "x.ckpt"
    path.write_bytes(b"hello world, definitely not a checkpoint")
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path)
