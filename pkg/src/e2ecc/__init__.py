"""End-to-end learning of binary linear codes with a Transformer decoder.

Submodules: ``gf2`` (exact GF(2) algebra), ``codes`` (builtin code families),
``channel`` (BPSK/AWGN), ``classic`` (BP and ML), ``autodiff`` (reverse-mode
autodiff with straight-through operators), ``codeparam`` (trainable code),
``model`` (decoder), ``train``, ``evaluation``, ``codeio`` and ``cli``.
"""
from .gf2 import Code, encode, gf2_matmul, standardize, syndrome

__version__ = "0.1.0"
__all__ = ["Code", "encode", "gf2_matmul", "standardize", "syndrome", "__version__"]
