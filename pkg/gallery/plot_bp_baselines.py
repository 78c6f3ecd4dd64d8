"""
Classical baselines on BCH(31,16)
=================================

Hard decision, belief propagation and exhaustive maximum likelihood on the
same channel draws. The harness reports -ln(BER); bigger is better.
"""

import numpy as np

from e2ecc.codes import builtin_code, builtin_H
from e2ecc.evaluation import (BPDecoder, EvalConfig, HardDecoder, LinearCode, MLDecoder,
                              format_table, sweep)

###############################################################################
# The cyclic BCH parity-check matrix is kept as is for BP; ML only needs the
# standard-form code, which enumerates 2^16 codewords.

H = builtin_H("bch_31_16")
code = LinearCode.from_parity_check(H, "bch_31_16")
print(code.n, code.k, "rate", code.k / code.n)

###############################################################################
# A short sweep. The acceptance suite uses at least 3e5 codewords per point;
# here every point stops at 2e4, and points with fewer than 50 error frames
# are marked as censored (``*``) instead of being run longer.

cfg = EvalConfig(min_codewords=20_000, max_codewords=20_000, min_error_frames=50,
                 chunk=5_000, seed=0)
decoders = [HardDecoder(), BPDecoder(code.H, 5), BPDecoder(code.H, 50),
            MLDecoder(builtin_code("bch_31_16"))]
reports = sweep(decoders, code, [4.0, 5.0, 6.0], cfg)
print(format_table(reports))

###############################################################################
# Plot the curves if matplotlib is around.

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    for rep in reports:
        plt.plot([p.ebno_db for p in rep.points], [p.neg_ln_ber for p in rep.points],
                 "o-", label=rep.decoder)
    plt.xlabel("Eb/N0 (dB)")
    plt.ylabel("-ln BER")
    plt.legend()
    plt.show()
