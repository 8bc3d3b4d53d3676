"""Soft-output syndrome-based neural decoding workbench.

Submodules: ``gf2`` (codes), ``channel`` (BPSK/AWGN), ``decoders`` (MAP, BP,
Chase), ``autodiff``, ``nn`` (Stacked-GRU decoder), ``training``, ``tpc``,
``harness`` (Monte-Carlo, statistics), ``config`` and ``cli``.
"""

from .gf2 import BinaryMatrix, LinearCode, build_code, encode
from .channel import RngStream, esn0_db_to_sigma2

__all__ = ["BinaryMatrix", "LinearCode", "build_code", "encode", "RngStream", "esn0_db_to_sigma2"]
__version__ = "0.1.0"
