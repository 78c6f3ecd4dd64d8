"""
From parity checks to an attention mask
=======================================

The decoder attends over ``2n - k`` tokens: one per bit and one per check.
The raw connectivity ``g(H)`` counts Tanner-graph paths between tokens and
a small per-layer network turns counts into additive attention scores.
"""

import numpy as np

from e2ecc.codeparam import build_mask
from e2ecc.codes import builtin_code
from e2ecc.model import DecoderModel

###############################################################################
# Hamming(7,4) in standard form: H = [P^T | I].

code = builtin_code("hamming_7_4")
print(code.H)

###############################################################################
# Bit-bit block ``H^T H`` holds the number of shared checks, with degrees on
# the diagonal; the off-diagonal blocks are plain adjacency.

g = build_mask(code.H).data
print(g.astype(int))

###############################################################################
# An untrained model maps the counts through its first-layer network. Equal
# counts always get equal scores, so the mask keeps the code's symmetry.

model = DecoderModel(code.n, code.k, N=1, d=16, h=8, seed=0)
mask = model.psi(0, g).data
for c in np.unique(g):
    print(f"count {int(c)} -> score {mask[g == c][0]:+.4f}")

###############################################################################
# Side by side, if matplotlib is available.

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    fig, ax = plt.subplots(1, 2, figsize=(8, 4))
    ax[0].imshow(g, cmap="Greys")
    ax[0].set_title("g(H)")
    ax[1].imshow(mask, cmap="coolwarm")
    ax[1].set_title("psi(g(H)), layer 0")
    plt.show()
