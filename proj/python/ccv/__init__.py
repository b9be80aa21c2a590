"""Overfitted video codec with a ~800-parameter decoder.

The heavy lifting lives in the C++ extension; this package re-exports the
main operations.
"""

from ccv._core import (
    bd_rate,
    complexity,
    decode,
    encode,
    plan_gop,
    psnr_420,
)

__all__ = ["encode", "decode", "psnr_420", "complexity", "plan_gop", "bd_rate"]
__version__ = "0.1.0"
