"""
Learning a small code end to end
================================

Trains the decoder and the code parameter jointly on a (15,7) code for a
few hundred steps, then compares the learned code with its random starting
point under BP, and the neural decoder with the hard decision.
"""

import numpy as np

from e2ecc.evaluation import (BPDecoder, HardDecoder, LinearCode, NeuralDecoder,
                              estimate_ber)
from e2ecc.gf2 import Code
from e2ecc.train import TrainConfig, fit

###############################################################################
# Reduced settings. The Omega learning-rate scale and the tight clamp keep the
# code parameter close enough to zero that bits can still flip on a short run.

cfg = TrainConfig(n=15, k=7, N=1, d=16, epochs=6, minibatches_per_epoch=50, batch_size=64,
                  lr_start=1e-3, lr_end=1e-5, omega_lr_scale=10.0, clamp_bound=0.02,
                  dtype="float32", seed=0)
ckpt = fit(cfg)
for row in ckpt.history:
    print(row)

###############################################################################
# How far did the code move from its random start?

print("bits flipped:", int((ckpt.P != ckpt.omega0).sum()), "of", ckpt.P.size)
print("learned H:\n", ckpt.H)

###############################################################################
# Quick evaluation at 4 dB.

learned = LinearCode.from_code(ckpt.code())
start = LinearCode.from_code(Code(ckpt.omega0, "start"))
kw = dict(min_codewords=20_000, chunk=5_000)
print("hard      ", estimate_ber(HardDecoder(), learned, 4.0, **kw).neg_ln_ber)
print("neural    ", estimate_ber(NeuralDecoder.from_checkpoint(ckpt), learned, 4.0, **kw).neg_ln_ber)
print("BP start  ", estimate_ber(BPDecoder(start.H, 50), start, 4.0, **kw).neg_ln_ber)
print("BP learned", estimate_ber(BPDecoder(learned.H, 50), learned, 4.0, **kw).neg_ln_ber)

###############################################################################
# Training loss per epoch.

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    plt.plot([r["epoch"] for r in ckpt.history], [r["loss"] for r in ckpt.history], "o-")
    plt.xlabel("epoch")
    plt.ylabel("BCE")
    plt.show()
