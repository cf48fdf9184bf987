"""Multispectral Riemannian classifier for 4-class motor-imagery EEG.

A filter bank of bandpass IIR filters feeds per-band regularized
covariance matrices, which are whitened against trained reference
matrices, mapped to the tangent space by a symmetric-EVD matrix
logarithm, vectorized, and classified by a linear SVM.  The package
provides the full-precision reference path and a mixed-precision
fixed-point path (8-bit streams and features, 12-bit filter
coefficients, 16-bit covariance, 32-bit whitening, float32 matrix
logarithm, 8-bit SVM weights) together with training, calibration of
all power-of-two dynamic ranges, and operation-count accounting.
"""

from .counters import FlopCounter, OpCounters, StageCounts
from .filterbank import (
    BandSpec,
    FilterDesignError,
    QuantizedSosCascade,
    QuantizedSosSection,
    SosSection,
    cascade_response,
    default_bands,
    design_bandpass,
    filter_apply_float,
    filter_apply_quant,
    filter_apply_quant_bank,
    quantize_cascade,
    quantize_section,
)
from .fixedpoint import (
    FixedMatrix,
    FixedScalar,
    dequantize,
    dequantize_matrix,
    quantize,
    quantize_matrix,
    rescale_shift,
    rescale_shift_matrix,
)
from .linalg import (
    ConvergenceError,
    EigenDecomposition,
    Tridiagonal,
    givens_coeffs,
    householder_tridiagonalize_basic,
    householder_tridiagonalize_improved,
    inv_sqrtm,
    matrix_logarithm,
    qr_wilkinson,
    symmetric_eig,
)
from .model import (
    DataError,
    FloatSvm,
    ModelParams,
    QuantFeatures,
    SvmParams,
    compute_reference,
    quantize_reference,
    quantize_svm,
    range_exponent,
    requantize_features,
    svm_infer_float,
    svm_infer_quant,
    svm_train,
    vect,
    vect_length,
)
from .pipeline import (
    TrainConfig,
    TrialWindow,
    calibrate_ranges,
    count_ops,
    evaluate,
    extract_features_float,
    extract_features_quant,
    infer,
    train,
)
from .riemann import (
    covariance_float,
    covariance_quant,
    whiten_float,
    whiten_quant,
)

__version__ = "0.1.0"
