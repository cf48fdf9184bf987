"""Regularized covariance and whitening, float and quantized.

The float path is the reference: ``C = X X^T + rho I`` and
``W = Cref C Cref`` with exact symmetry enforced (mirroring the
computed upper triangle for integer results, averaging for float).

The quantized path works on the fixed-point carriers: 8-bit filtered
samples produce a 16-bit covariance through one calibrated power-of-two
shift; whitening multiplies by the 11-bit reference matrix twice, with
the intermediate product narrowed to 16 bits by a second calibrated
shift and the final result kept at the full 32-bit range for the
matrix-logarithm input.  Accumulation is 64-bit, so every integer
result is exact before the declared narrowing points.
"""

from __future__ import annotations

import numpy as np

from .fixedpoint import (
    FixedMatrix,
    _round_half_away,
    shift_round_half_up,
    signed_max,
    signed_min,
)

__all__ = [
    "covariance_float",
    "covariance_accumulate",
    "covariance_quant",
    "whiten_float",
    "whiten_quant",
    "required_shift",
]

COV_BITS = 16
WHITEN_BITS = 32


def _mirror_upper(m: np.ndarray) -> np.ndarray:
    """Copy the upper triangle onto the lower one (exact symmetry)."""
    return np.triu(m) + np.triu(m, 1).T


def covariance_float(X: np.ndarray, rho: float = 1.0) -> np.ndarray:
    """Sample covariance (unnormalized) with ridge regularization."""
    X = np.asarray(X, dtype=np.float64)
    return _mirror_upper(X @ X.T) + rho * np.eye(X.shape[0])


def covariance_accumulate(X: FixedMatrix, rho: float):
    """Wide integer covariance accumulator (pre-shift) and its exponent.

    ``rho`` is quantized onto the product scale (2 * input exponent) and
    added here, so the regularizer participates in the same exact
    integer arithmetic as the data term.
    """
    prod_exponent = 2 * X.exponent
    rho_int = int(_round_half_away(rho * 2.0 ** (-prod_exponent)))
    acc = _mirror_upper(X.values @ X.values.T)
    acc += rho_int * np.eye(X.rows, dtype=np.int64)
    return acc, prod_exponent


def covariance_quant(X: FixedMatrix, rho: float, out_shift: int) -> FixedMatrix:
    """16-bit covariance of an 8-bit window with a power-of-two rescale."""
    acc, prod_exponent = covariance_accumulate(X, rho)
    v = shift_round_half_up(acc, out_shift)
    v = np.clip(v, signed_min(COV_BITS), signed_max(COV_BITS))
    return FixedMatrix(v, COV_BITS, prod_exponent + out_shift, symmetric=True)


def whiten_float(C: np.ndarray, Cref: np.ndarray) -> np.ndarray:
    """W = Cref @ C @ Cref, symmetrized by averaging."""
    W = Cref @ C @ Cref
    return (W + W.T) / 2


def whiten_quant(C: FixedMatrix, Cref: FixedMatrix, mid_shift: int) -> FixedMatrix:
    """Two-step integer whitening: 16-bit intermediate, 32-bit result.

    The first product is narrowed with the calibrated ``mid_shift``;
    the second accumulates in 64-bit and saturates (never in practice)
    to the declared 32-bit output.  The upper triangle of the result is
    mirrored: the intermediate rounding is not symmetric, and the
    eigensolver downstream requires exact symmetry.
    """
    p1 = Cref.values @ C.values
    p1 = shift_round_half_up(p1, mid_shift)
    p1 = np.clip(p1, signed_min(COV_BITS), signed_max(COV_BITS))
    w = p1 @ Cref.values
    w = _mirror_upper(w)
    w = np.clip(w, signed_min(WHITEN_BITS), signed_max(WHITEN_BITS))
    exponent = C.exponent + 2 * Cref.exponent + mid_shift
    return FixedMatrix(w, WHITEN_BITS, exponent, symmetric=True)


def required_shift(max_abs: int, target_bits: int, headroom: int = 1) -> int:
    """Smallest right shift fitting ``max_abs`` in target_bits-1-headroom bits."""
    return max(0, int(max_abs).bit_length() - (target_bits - 1 - headroom))
