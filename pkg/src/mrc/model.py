"""Feature vectorization, linear SVM, and dynamic-range rules.

The feature map of one trial is the band-wise concatenation of
``vect(L)`` vectors: matrix diagonal first, then the strict upper
triangle in row-major order scaled by sqrt(2), which makes the vector's
2-norm equal the matrix Frobenius norm.  The quantized path carries
features as 8-bit integers at one global power-of-two exponent learned
in calibration.

The classifier is a one-vs-rest linear SVM trained by deterministic
full-batch subgradient descent on the L2-regularized hinge loss
(C = 1, 500 epochs, 1/(lambda*t) step schedule): no randomness, so
retraining on identical data is bit-identical.  Quantization packs the
weights onto the full 8-bit range and converts the biases to the score
scale (weight exponent + feature exponent), so inference never rescales
its 32-bit scores; the prediction only compares them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fixedpoint import (
    FixedMatrix,
    _round_half_away,
    quantize_matrix,
    signed_max,
    signed_min,
)
from .linalg import inv_sqrtm

__all__ = [
    "DataError",
    "QuantFeatures",
    "FloatSvm",
    "SvmParams",
    "ModelParams",
    "vect",
    "vect_length",
    "requantize_features",
    "range_exponent",
    "quantize_reference",
    "compute_reference",
    "svm_train",
    "quantize_svm",
    "svm_infer_float",
    "svm_infer_quant",
]

SVM_WEIGHT_BITS = 8
SVM_BIAS_BITS = 32
REFERENCE_BITS = 11
FEATURE_BITS = 8


class DataError(ValueError):
    """Semantically unusable data (missing classes, no labels, ...)."""


@dataclass
class QuantFeatures:
    """8-bit feature vector at one shared power-of-two exponent."""

    values: np.ndarray
    exponent: int

    def dequantize(self) -> np.ndarray:
        return self.values.astype(np.float64) * 2.0 ** self.exponent


@dataclass
class FloatSvm:
    weights: np.ndarray  # (n_classes, n_features)
    biases: np.ndarray   # (n_classes,)


@dataclass
class SvmParams:
    """Quantized one-vs-rest SVM: 8-bit weights, 32-bit biases."""

    weights: np.ndarray
    weight_exponent: int
    biases: np.ndarray
    bias_exponent: int


def vect_length(n: int) -> int:
    return n * (n + 1) // 2


def vect(L: np.ndarray) -> np.ndarray:
    """Diagonal, then sqrt(2)-scaled upper off-diagonals (row-major).

    Norm preserving: ||vect(L)||_2 == ||L||_F for symmetric L.
    """
    L = np.asarray(L, dtype=np.float64)
    iu = np.triu_indices(L.shape[0], 1)
    return np.concatenate([np.diagonal(L), np.sqrt(2.0) * L[iu]])


def requantize_features(v: np.ndarray, feature_exponent: int) -> QuantFeatures:
    """Quantize a real feature vector to 8 bits at the learned scale."""
    scaled = _round_half_away(np.asarray(v, dtype=np.float64) * 2.0 ** (-feature_exponent))
    q = np.clip(scaled.astype(np.int64), signed_min(FEATURE_BITS), signed_max(FEATURE_BITS))
    return QuantFeatures(q, feature_exponent)


def range_exponent(max_abs: float, bits: int, headroom: int = 1) -> int:
    """Power-of-two scale for `bits`-bit storage of values up to max_abs.

    The range is the smallest power of two at or above ``max_abs``,
    widened by ``headroom`` extra bits; zero input falls back to the
    unit range.  E.g. max 3.7 at 8 bits with one headroom bit lives in
    [-8, 8) and gets exponent -4.
    """
    if max_abs <= 0:
        return -(bits - 1)
    frac, exp = math.frexp(float(max_abs))  # max_abs = frac * 2**exp
    ceil_log2 = exp - 1 if frac == 0.5 else exp
    return ceil_log2 + headroom - (bits - 1)


def quantize_reference(cref: np.ndarray, bits: int = REFERENCE_BITS) -> FixedMatrix:
    """Quantize a reference matrix, widening the range until it fits.

    The headroom rule already guarantees the fit; the loop is the
    explicit overflow repair for exponents forced from elsewhere.
    """
    m = float(np.max(np.abs(cref)))
    e = range_exponent(m, bits, headroom=1)
    while np.max(np.abs(_round_half_away(cref * 2.0 ** (-e)))) > signed_max(bits):
        e += 1
    return quantize_matrix(cref, bits, e, symmetric=True)


def compute_reference(train_covs, lambda_min: float = 1e-3) -> np.ndarray:
    """Inverse square root of the mean training covariance (float64)."""
    if len(train_covs) == 0:
        raise DataError("empty training set")
    mean = np.mean(np.stack([np.asarray(c, dtype=np.float64) for c in train_covs]), axis=0)
    return inv_sqrtm((mean + mean.T) / 2, lambda_min=lambda_min)


def svm_train(features: np.ndarray, labels: np.ndarray,
              n_classes: int = 4, c: float = 1.0, epochs: int = 500) -> FloatSvm:
    """One-vs-rest L2 hinge loss by full-batch subgradient descent.

    Step size 1/(lambda*t) with lambda = 1/(c*n); weights start at
    zero and the loop is completely deterministic.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n, d = X.shape
    present = np.unique(y)
    if any(k not in present for k in range(n_classes)):
        raise DataError("degenerate training set")

    Y = np.where(y[:, None] == np.arange(n_classes)[None, :], 1.0, -1.0)  # (n, K)
    lam = 1.0 / (c * n)
    W = np.zeros((n_classes, d))
    b = np.zeros(n_classes)
    for t in range(1, epochs + 1):
        eta = 1.0 / (lam * t)
        margins = Y * (X @ W.T + b)          # (n, K)
        active = (margins < 1.0) * Y         # +-1 where the hinge is active
        W += eta * (active.T @ X / n - lam * W)
        b += eta * active.sum(axis=0) / n
    return FloatSvm(W, b)


def quantize_svm(svm: FloatSvm, feature_exponent: int) -> SvmParams:
    """8-bit weights on the full range; biases moved to the score scale."""
    w_max = float(np.max(np.abs(svm.weights))) if svm.weights.size else 0.0
    w_exp = range_exponent(w_max, SVM_WEIGHT_BITS, headroom=0)
    wq = _round_half_away(svm.weights * 2.0 ** (-w_exp)).astype(np.int64)
    wq = np.clip(wq, signed_min(SVM_WEIGHT_BITS), signed_max(SVM_WEIGHT_BITS))
    b_exp = w_exp + feature_exponent
    bq = _round_half_away(svm.biases * 2.0 ** (-b_exp)).astype(np.int64)
    bq = np.clip(bq, signed_min(SVM_BIAS_BITS), signed_max(SVM_BIAS_BITS))
    return SvmParams(wq, w_exp, bq, b_exp)


def svm_infer_float(features: np.ndarray, svm: FloatSvm):
    scores = svm.weights @ np.asarray(features, dtype=np.float64) + svm.biases
    return int(np.argmax(scores)), scores


def svm_infer_quant(x: QuantFeatures, svm: SvmParams):
    """Integer scores (32-bit saturated, never rescaled) and argmax class.

    Ties break to the lowest class index.
    """
    acc = svm.weights @ x.values + svm.biases
    scores = np.clip(acc, signed_min(SVM_BIAS_BITS), signed_max(SVM_BIAS_BITS))
    return int(np.argmax(scores)), scores


@dataclass
class ModelParams:
    """Everything learned in training, quantized and float-shadow forms."""

    bands: list
    float_sections: list          # per band: list[SosSection]
    cascades: list                # per band: QuantizedSosCascade
    cref_float: list              # per band: float64 ndarray
    cref: list                    # per band: FixedMatrix (11-bit values)
    cov_shift: list
    whiten_shift: list
    feature_exponent: int
    svm_float: FloatSvm
    svm: SvmParams
    rho: float = 1.0
    lambda_min: float = 1e-3
    n_channels: int = 22
    n_samples: int = 875
    sampling_rate_hz: float = 250.0
    input_exponent: int = -7
    window_offset_seconds: float = 2.0

    @property
    def n_bands(self) -> int:
        return len(self.bands)

    @property
    def n_features(self) -> int:
        return self.n_bands * vect_length(self.n_channels)

    @property
    def n_classes(self) -> int:
        return self.svm.weights.shape[0]
