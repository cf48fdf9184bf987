"""Fixed-point scalars and matrices with power-of-two scaling.

Every quantized stage of the classifier carries its data as signed
integers together with a bit width and a power-of-two exponent, so that
``real value = integer * 2**exponent``.  All narrowing operations
saturate instead of wrapping, and all arithmetic on the integer side is
exact (64-bit accumulators, far wider than any value produced by the
pipeline's stage widths).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FixedScalar",
    "FixedMatrix",
    "signed_min",
    "signed_max",
    "quantize",
    "dequantize",
    "rescale_shift",
    "quantize_matrix",
    "dequantize_matrix",
    "rescale_shift_matrix",
    "shift_round_half_up",
]


def signed_min(bits: int) -> int:
    return -(1 << (bits - 1))


def signed_max(bits: int) -> int:
    return (1 << (bits - 1)) - 1


def _round_half_away(x):
    """Round to nearest integer, ties away from zero (vectorized)."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class FixedScalar:
    """A signed integer with a declared width and power-of-two scale."""

    value: int
    bits: int
    exponent: int

    def __post_init__(self):
        if not signed_min(self.bits) <= self.value <= signed_max(self.bits):
            raise ValueError(
                f"value {self.value} does not fit {self.bits} signed bits"
            )

    def to_float(self) -> float:
        return dequantize(self)


@dataclass(frozen=True)
class FixedMatrix:
    """Row-major integer matrix sharing one width and exponent.

    ``values`` is an int64 ndarray; entries must respect the declared
    ``bits`` range.  ``symmetric`` asserts exact (bit-level) symmetry.
    """

    values: np.ndarray
    bits: int
    exponent: int
    symmetric: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int64)
        object.__setattr__(self, "values", v)
        if v.ndim != 2:
            raise ValueError("FixedMatrix requires a 2-D array")
        if v.size and (v.min() < signed_min(self.bits) or v.max() > signed_max(self.bits)):
            raise ValueError(f"entries exceed {self.bits} signed bits")
        if self.symmetric and not np.array_equal(v, v.T):
            raise ValueError("symmetric-flagged matrix is not bit-symmetric")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def to_float(self) -> np.ndarray:
        return dequantize_matrix(self)


def quantize(x: float, bits: int, exponent: int) -> FixedScalar:
    """Quantize a real number: round to nearest (ties away), saturate.

    The result's integer is ``clamp(round(x / 2**exponent))`` on the
    signed range of ``bits``.
    """
    scaled = float(x) * 2.0 ** (-exponent)
    v = int(_round_half_away(scaled))
    v = max(signed_min(bits), min(signed_max(bits), v))
    return FixedScalar(v, bits, exponent)


def dequantize(s: FixedScalar) -> float:
    return float(s.value) * 2.0 ** s.exponent


def rescale_shift(s: FixedScalar, new_bits: int, shift: int) -> FixedScalar:
    """Narrow by a right shift with round-half-up, saturating to new_bits.

    The exponent grows by ``shift`` so the represented value is
    preserved up to the rounding of the shifted-out bits.
    """
    if shift < 0:
        raise ValueError("shift must be >= 0")
    v = shift_round_half_up(s.value, shift)
    v = max(signed_min(new_bits), min(signed_max(new_bits), int(v)))
    return FixedScalar(v, new_bits, s.exponent + shift)


def shift_round_half_up(value, shift: int):
    """(value + 2**(shift-1)) >> shift, elementwise; shift 0 is identity.

    Python/numpy ``>>`` on signed integers is an arithmetic (floor)
    shift, so adding half of the shifted-out weight first gives
    round-half-up, i.e. ties toward +inf.
    """
    if shift == 0:
        return value
    return (value + (1 << (shift - 1))) >> shift


def quantize_matrix(x: np.ndarray, bits: int, exponent: int,
                    symmetric: bool = False) -> FixedMatrix:
    """Elementwise quantize of a real matrix to one shared exponent."""
    scaled = np.asarray(x, dtype=np.float64) * 2.0 ** (-exponent)
    v = _round_half_away(scaled).astype(np.int64)
    v = np.clip(v, signed_min(bits), signed_max(bits))
    return FixedMatrix(v, bits, exponent, symmetric=symmetric)


def dequantize_matrix(m: FixedMatrix) -> np.ndarray:
    return m.values.astype(np.float64) * 2.0 ** m.exponent


def rescale_shift_matrix(m: FixedMatrix, new_bits: int, shift: int) -> FixedMatrix:
    """Matrix counterpart of :func:`rescale_shift` (exact, elementwise)."""
    if shift < 0:
        raise ValueError("shift must be >= 0")
    v = shift_round_half_up(m.values, shift)
    v = np.clip(v, signed_min(new_bits), signed_max(new_bits))
    return FixedMatrix(v, new_bits, m.exponent + shift, symmetric=m.symmetric)
