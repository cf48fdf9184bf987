"""End-to-end training, inference, evaluation and op accounting.

One trial flows through per-band stages (filter, covariance, whitening,
matrix logarithm, vectorization) and a final SVM.  The float path is
the full-precision reference; the quantized path follows the
mixed-precision layout: 8-bit samples and filter streams, 16-bit
covariance, 32-bit whitening output, float32 matrix logarithm, 8-bit
requantized features, integer SVM scores.

Bands are independent: extraction accepts a ``threads`` width and
produces bit-identical results for any scheduling, because per-band
work shares nothing and the assembly is by band index.

Training performs, in order: filter design and quantization, a float
forward pass collecting per-band covariances, reference-matrix
computation and 11-bit quantization, range calibration (covariance and
whitening shifts, feature exponent) from the quantized forward pass on
the training set, and finally two SVM fits: the float SVM on float
features, the quantized SVM on dequantized 8-bit features.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import filterbank, linalg, riemann
from .counters import FlopCounter, OpCounters
from .fixedpoint import (
    FixedMatrix,
    _round_half_away,
    shift_round_half_up,
    signed_max,
    signed_min,
)
from .model import (
    DataError,
    ModelParams,
    QuantFeatures,
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

__all__ = [
    "TrialWindow",
    "TrainConfig",
    "CalibrationResult",
    "extract_features_float",
    "extract_features_quant",
    "infer",
    "train",
    "calibrate_ranges",
    "evaluate",
    "count_ops",
    "bench_stages",
]

UNLABELED = 255


@dataclass
class TrialWindow:
    """One EEG window: channels x samples, optional class label."""

    samples: np.ndarray
    label: int | None = None
    sampling_rate_hz: float = 250.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ValueError("trial samples must be channels x samples")


@dataclass
class TrainConfig:
    band_low_hz: float = 4.0
    band_high_hz: float = 40.0
    band_width_hz: float = 2.0
    sections: int = 2
    rho: float = 1.0
    lambda_min: float = 1e-3
    window_seconds: float = 3.5
    window_offset_seconds: float = 2.0
    seed: int = 0
    svm_c: float = 1.0
    svm_epochs: int = 500

    def bands(self, sampling_rate_hz: float):
        lows = np.arange(self.band_low_hz, self.band_high_hz, self.band_width_hz)
        return [filterbank.BandSpec(lo, lo + self.band_width_hz, sampling_rate_hz)
                for lo in lows]


def _window(trial: TrialWindow, n_samples: int, offset_seconds: float) -> np.ndarray:
    have = trial.samples.shape[1]
    if have == n_samples:
        return trial.samples
    if have < n_samples:
        raise DataError("trial shorter than the model window")
    start = int(round(offset_seconds * trial.sampling_rate_hz))
    if start + n_samples > have:
        start = have - n_samples
    return trial.samples[:, start:start + n_samples]


def _model_window(trial: TrialWindow, model: ModelParams) -> np.ndarray:
    x = _window(trial, model.n_samples, model.window_offset_seconds)
    if x.shape[0] != model.n_channels:
        raise DataError("channel count does not match the model")
    return x


def _quantize_input(x: np.ndarray, exponent: int) -> np.ndarray:
    v = _round_half_away(x * 2.0 ** (-exponent)).astype(np.int64)
    return np.clip(v, signed_min(8), signed_max(8))


def _map_bands(fn, n_bands: int, threads: int):
    if threads <= 1 or n_bands <= 1:
        return [fn(b) for b in range(n_bands)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_bands)))


def _stage_tallies(model: ModelParams):
    """Closed-form per-trial op counts of the integer stages."""
    n, ns = model.n_channels, model.n_samples
    tri = vect_length(n)
    iir_macs = sum(c.macs_per_sample for c in model.cascades) * n * ns
    iir_shifts = sum(c.shifts_per_sample for c in model.cascades) * n * ns
    cov_macs = model.n_bands * tri * ns
    cov_shifts = model.n_bands * tri
    whiten_macs = model.n_bands * (n ** 3 + n * tri)
    whiten_shifts = model.n_bands * n * n
    vect_flops = model.n_bands * (tri - n)  # sqrt(2) scalings
    return (iir_macs, iir_shifts, cov_macs, cov_shifts,
            whiten_macs, whiten_shifts, vect_flops)


def _add_stage_counts(ops: OpCounters | None, model: ModelParams, mode: str):
    if ops is None:
        return
    (iir_macs, iir_shifts, cov_macs, cov_shifts,
     whiten_macs, whiten_shifts, vect_flops) = _stage_tallies(model)
    if mode == "quant":
        ops.add("iir", fixed_macs=iir_macs, shifts=iir_shifts)
        ops.add("covariance", fixed_macs=cov_macs, shifts=cov_shifts)
        ops.add("whitening", fixed_macs=whiten_macs, shifts=whiten_shifts)
    else:
        ops.add("iir", flops=iir_macs)
        ops.add("covariance", flops=cov_macs)
        ops.add("whitening", flops=whiten_macs)
    ops.add("vect", flops=vect_flops)


def _add_svm_counts(ops: OpCounters | None, model: ModelParams, mode: str):
    if ops is None:
        return
    k, f = model.svm.weights.shape
    if mode == "quant":
        ops.add("svm", fixed_macs=k * f)
    else:
        ops.add("svm", flops=k * f)


def _band_logm(W, model: ModelParams, band: int, dtype, ops: OpCounters | None):
    fc = FlopCounter() if ops is not None else None
    try:
        L = linalg.matrix_logarithm(W, model.lambda_min, dtype=dtype, ops=fc)
    except linalg.ConvergenceError as e:
        raise linalg.ConvergenceError(f"band {band}: {e}") from e
    if ops is not None:
        ops.add("logm", flops=fc.flops)
    return L


def extract_features_float(trial: TrialWindow, model: ModelParams, *,
                           ops: OpCounters | None = None,
                           threads: int = 1) -> np.ndarray:
    """Full-precision feature vector (float64 reference path)."""
    X = _model_window(trial, model)

    def band_features(b):
        xf = filterbank.filter_apply_float(X, model.float_sections[b])
        C = riemann.covariance_float(xf, model.rho)
        W = riemann.whiten_float(C, model.cref_float[b])
        L = _band_logm(W, model, b, np.float64, ops)
        return vect(L)

    segments = _map_bands(band_features, model.n_bands, threads)
    _add_stage_counts(ops, model, "float")
    return np.concatenate(segments) if segments else np.zeros(0)


def _filter_bank_quant(Xq: np.ndarray, model: ModelParams, threads: int) -> np.ndarray:
    if model.n_bands == 0:
        return np.zeros((0,) + Xq.shape, dtype=np.int64)
    if threads <= 1 or model.n_bands <= 1:
        return filterbank.filter_apply_quant_bank(Xq, model.cascades)
    chunks = np.array_split(np.arange(model.n_bands), min(threads, model.n_bands))

    def run(chunk):
        return filterbank.filter_apply_quant_bank(
            Xq, [model.cascades[i] for i in chunk])

    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(run, chunks))
    return np.concatenate(parts, axis=0)


def extract_features_quant(trial: TrialWindow, model: ModelParams, *,
                           ops: OpCounters | None = None,
                           threads: int = 1) -> QuantFeatures:
    """Mixed-precision feature vector (8-bit values, shared exponent)."""
    X = _model_window(trial, model)
    Xq = _quantize_input(X, model.input_exponent)
    bank = _filter_bank_quant(Xq, model, threads)

    def band_features(b):
        xb = FixedMatrix(bank[b], 8, model.cascades[b].output_exponent)
        C = riemann.covariance_quant(xb, model.rho, model.cov_shift[b])
        Wq = riemann.whiten_quant(C, model.cref[b], model.whiten_shift[b])
        W32 = Wq.values.astype(np.float32) * np.float32(2.0 ** Wq.exponent)
        L = _band_logm(W32, model, b, np.float32, ops)
        return requantize_features(vect(L), model.feature_exponent).values

    segments = _map_bands(band_features, model.n_bands, threads)
    _add_stage_counts(ops, model, "quant")
    values = np.concatenate(segments) if segments else np.zeros(0, dtype=np.int64)
    return QuantFeatures(values, model.feature_exponent)


def infer(trial: TrialWindow, model: ModelParams, mode: str = "float", *,
          ops: OpCounters | None = None, threads: int = 1):
    """Classify one trial; returns (class index, per-class scores)."""
    if mode == "float":
        feats = extract_features_float(trial, model, ops=ops, threads=threads)
        _add_svm_counts(ops, model, mode)
        return svm_infer_float(feats, model.svm_float)
    if mode == "quant":
        feats = extract_features_quant(trial, model, ops=ops, threads=threads)
        _add_svm_counts(ops, model, mode)
        return svm_infer_quant(feats, model.svm)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class CalibrationResult:
    cov_shift: list
    whiten_shift: list
    feature_exponent: int
    train_features_quant: np.ndarray  # (n_trials, n_features) int64


def calibrate_ranges(windows, model: ModelParams, *,
                     threads: int = 1) -> CalibrationResult:
    """Learn the power-of-two ranges from quantized forward passes.

    ``model`` must already hold quantized filters and reference
    matrices.  Covariance and whitening shifts are the smallest shifts
    fitting the largest observed accumulator into the stage width with
    one headroom bit; the feature exponent covers the largest float32
    feature magnitude, again with one headroom bit.  Also returns the
    training set's quantized features so training does not repeat the
    forward pass.
    """
    if len(windows) == 0:
        raise DataError("empty training set")
    nb = model.n_bands
    n = model.n_channels
    n_trials = len(windows)

    # pass 1: integer covariance accumulators per trial and band
    accs = np.empty((n_trials, nb, n, n), dtype=np.int64)
    for i, X in enumerate(windows):
        Xq = _quantize_input(X, model.input_exponent)
        bank = _filter_bank_quant(Xq, model, threads)
        for b in range(nb):
            accs[i, b], _ = riemann.covariance_accumulate(
                FixedMatrix(bank[b], 8, model.cascades[b].output_exponent),
                model.rho)
    cov_shift = [riemann.required_shift(int(np.max(np.abs(accs[:, b]))),
                                        riemann.COV_BITS) for b in range(nb)]

    # pass 2: covariances at the calibrated scale, whitening mid products
    covs = np.empty_like(accs)
    for b in range(nb):
        covs[:, b] = np.clip(shift_round_half_up(accs[:, b], cov_shift[b]),
                             signed_min(riemann.COV_BITS),
                             signed_max(riemann.COV_BITS))
    mids = np.einsum("bij,tbjk->tbik",
                     np.stack([m.values for m in model.cref]), covs)
    whiten_shift = [riemann.required_shift(int(np.max(np.abs(mids[:, b]))),
                                           riemann.COV_BITS) for b in range(nb)]

    # pass 3: whitened matrices, float32 logm, feature magnitudes
    feats = np.empty((n_trials, model.n_features))
    for i in range(n_trials):
        def band_values(b):
            cov = FixedMatrix(covs[i, b], riemann.COV_BITS,
                              2 * model.cascades[b].output_exponent + cov_shift[b],
                              symmetric=True)
            Wq = riemann.whiten_quant(cov, model.cref[b], whiten_shift[b])
            W32 = Wq.values.astype(np.float32) * np.float32(2.0 ** Wq.exponent)
            return vect(_band_logm(W32, model, b, np.float32, None))
        feats[i] = np.concatenate(_map_bands(band_values, nb, threads))
    feature_exponent = range_exponent(float(np.max(np.abs(feats))), 8)
    qfeats = np.stack([requantize_features(f, feature_exponent).values
                       for f in feats])
    return CalibrationResult(cov_shift, whiten_shift, feature_exponent, qfeats)


def train(trials, config: TrainConfig | None = None, *, threads: int = 1) -> ModelParams:
    """Fit the complete model on labelled trials (see module docstring)."""
    if config is None:
        config = TrainConfig()
    if len(trials) == 0:
        raise DataError("empty training set")
    if any(t.label is None for t in trials):
        raise DataError("degenerate training set: unlabeled trials")
    rate = trials[0].sampling_rate_hz
    if any(t.sampling_rate_hz != rate for t in trials):
        raise DataError("inconsistent sampling rates")
    labels = np.array([t.label for t in trials], dtype=np.int64)

    n_samples = int(round(config.window_seconds * rate))
    windows = [_window(t, n_samples, config.window_offset_seconds) for t in trials]
    n_channels = windows[0].shape[0]

    bands = config.bands(rate)
    float_sections = [filterbank.design_bandpass(b, config.sections) for b in bands]
    input_exponent = range_exponent(max(float(np.max(np.abs(w))) for w in windows), 8)
    cascades = [filterbank.quantize_cascade(
        s, sampling_rate_hz=rate, input_exponent=input_exponent,
        seed=config.seed) for s in float_sections]

    # float forward pass: per-band covariances, then references
    covs = np.empty((len(windows), len(bands), n_channels, n_channels))
    for i, X in enumerate(windows):
        def band_cov(b):
            xf = filterbank.filter_apply_float(X, float_sections[b])
            return riemann.covariance_float(xf, config.rho)
        covs[i] = np.stack(_map_bands(band_cov, len(bands), threads))
    cref_float = [compute_reference(covs[:, b], config.lambda_min)
                  for b in range(len(bands))]
    cref = [quantize_reference(c) for c in cref_float]

    model = ModelParams(
        bands=bands, float_sections=float_sections, cascades=cascades,
        cref_float=cref_float, cref=cref, cov_shift=[], whiten_shift=[],
        feature_exponent=0, svm_float=None, svm=None, rho=config.rho,
        lambda_min=config.lambda_min, n_channels=n_channels,
        n_samples=n_samples, sampling_rate_hz=rate,
        input_exponent=input_exponent,
        window_offset_seconds=config.window_offset_seconds)

    cal = calibrate_ranges(windows, model, threads=threads)
    model.cov_shift = cal.cov_shift
    model.whiten_shift = cal.whiten_shift
    model.feature_exponent = cal.feature_exponent

    # quantized-path SVM: trained on the dequantized 8-bit features
    qfeats = cal.train_features_quant.astype(np.float64) * 2.0 ** cal.feature_exponent
    svm_q_float = svm_train(qfeats, labels, n_classes=4, c=config.svm_c,
                            epochs=config.svm_epochs)
    model.svm = quantize_svm(svm_q_float, cal.feature_exponent)

    # float-path SVM: trained on float features
    ffeats = np.empty((len(windows), model.n_features))
    for i in range(len(windows)):
        def band_values(b):
            W = riemann.whiten_float(covs[i, b], cref_float[b])
            return vect(_band_logm(W, model, b, np.float64, None))
        ffeats[i] = np.concatenate(_map_bands(band_values, len(bands), threads))
    model.svm_float = svm_train(ffeats, labels, n_classes=4, c=config.svm_c,
                                epochs=config.svm_epochs)
    return model


def evaluate(trials, model: ModelParams, mode: str = "float", *,
             threads: int = 1):
    """Accuracy and 4x4 confusion matrix (rows = true class)."""
    if len(trials) == 0:
        raise DataError("unlabeled dataset")
    if any(t.label is None for t in trials):
        raise DataError("unlabeled dataset")
    k = model.n_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    for t in trials:
        pred, _ = infer(t, model, mode, threads=threads)
        confusion[t.label, pred] += 1
    accuracy = float(np.trace(confusion)) / len(trials)
    return accuracy, confusion


def count_ops(trial: TrialWindow, model: ModelParams,
              mode: str = "quant") -> OpCounters:
    """Per-stage operation counts for one trial at the given mode."""
    ops = OpCounters()
    infer(trial, model, mode, ops=ops)
    return ops


def bench_stages(trial: TrialWindow, model: ModelParams, mode: str = "quant",
                 repetitions: int = 3, threads: int = 1):
    """Median wall time per stage over repeated runs, plus op counts.

    The staged run reuses the pipeline primitives stage by stage so the
    timings attribute exactly the work the pipeline does.
    """
    import time

    ops = count_ops(trial, model, mode)
    X = _model_window(trial, model)
    times = {s: [] for s in ("iir", "covariance", "whitening", "logm",
                             "vect", "svm")}
    for _ in range(max(1, repetitions)):
        if mode == "quant":
            t0 = time.perf_counter()
            Xq = _quantize_input(X, model.input_exponent)
            bank = _filter_bank_quant(Xq, model, threads)
            t1 = time.perf_counter()
            covs = [riemann.covariance_quant(
                FixedMatrix(bank[b], 8, model.cascades[b].output_exponent),
                model.rho, model.cov_shift[b]) for b in range(model.n_bands)]
            t2 = time.perf_counter()
            ws = [riemann.whiten_quant(covs[b], model.cref[b],
                                       model.whiten_shift[b])
                  for b in range(model.n_bands)]
            t3 = time.perf_counter()
            ls = [_band_logm(w.values.astype(np.float32)
                             * np.float32(2.0 ** w.exponent),
                             model, b, np.float32, None)
                  for b, w in enumerate(ws)]
            t4 = time.perf_counter()
            feats = QuantFeatures(np.concatenate(
                [requantize_features(vect(L), model.feature_exponent).values
                 for L in ls]), model.feature_exponent)
            t5 = time.perf_counter()
            svm_infer_quant(feats, model.svm)
            t6 = time.perf_counter()
        else:
            t0 = time.perf_counter()
            xf = [filterbank.filter_apply_float(X, model.float_sections[b])
                  for b in range(model.n_bands)]
            t1 = time.perf_counter()
            covs = [riemann.covariance_float(x, model.rho) for x in xf]
            t2 = time.perf_counter()
            ws = [riemann.whiten_float(c, r)
                  for c, r in zip(covs, model.cref_float)]
            t3 = time.perf_counter()
            ls = [_band_logm(w, model, b, np.float64, None)
                  for b, w in enumerate(ws)]
            t4 = time.perf_counter()
            feats = np.concatenate([vect(L) for L in ls])
            t5 = time.perf_counter()
            svm_infer_float(feats, model.svm_float)
            t6 = time.perf_counter()
        for stage, dt in zip(("iir", "covariance", "whitening", "logm",
                              "vect", "svm"),
                             (t1 - t0, t2 - t1, t3 - t2, t4 - t3,
                              t5 - t4, t6 - t5)):
            times[stage].append(dt)
    medians = {s: float(np.median(v)) for s, v in times.items()}
    return ops, medians
