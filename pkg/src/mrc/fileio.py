"""Binary dataset/model files and the CSV trial importer.

Dataset file (little-endian):
  magic "MRCD" | version u16 = 1 | reserved u16 | trial count u32 |
  channel count u16 | sample count u32 | sampling rate f32 |
  one label byte per trial (255 = unlabeled) |
  samples as f32, trial-major, then channel-major, then sample.

Model file (little-endian):
  magic "MRCM" | version u16 = 1 |
  dimensions block: bands u32, channels u32, features u32, classes u32 |
  per band: section count u16, then per section five s16 coefficients
    (b0 b1 b2 a1 a2), coefficient exponent s8, output shift u8 |
  per band: covariance shift u8, whitening shift u8 |
  per band: reference upper triangle s16 (row-major, diagonal included),
    exponent s8 |
  feature exponent s8 |
  SVM weights s8 row-major, weight exponent s8 | biases s32 |
  float-path shadow parameters appended as f64 blocks in the same
  order: header scalars (rho, lambda_min, input exponent, window
  samples, sampling rate, window offset seconds), per band the edges
  (low, high), float section coefficients (five per section), cascade
  output exponent and per-section rebalancing gain exponents, the float
  reference upper triangle; then float SVM weights and biases.

Readers raise :class:`FormatError` naming the byte offset on any
truncation, and on bad magic or version.
"""

from __future__ import annotations

import struct

import numpy as np

from .filterbank import BandSpec, QuantizedSosCascade, QuantizedSosSection, SosSection
from .fixedpoint import FixedMatrix
from .model import FloatSvm, ModelParams, SvmParams, vect_length
from .pipeline import UNLABELED, TrialWindow

__all__ = [
    "FormatError",
    "save_dataset",
    "load_dataset",
    "save_model",
    "load_model",
    "import_csv_manifest",
]

DATASET_MAGIC = b"MRCD"
MODEL_MAGIC = b"MRCM"
FORMAT_VERSION = 1


class FormatError(Exception):
    pass


class _Reader:
    def __init__(self, data: bytes, name: str):
        self.data = data
        self.name = name
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise FormatError(
                f"{self.name}: truncated at byte offset {self.offset} "
                f"({n} bytes needed, {len(self.data) - self.offset} left)")
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        vals = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return vals if len(vals) > 1 else vals[0]

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        raw = self.take(dt.itemsize * count)
        return np.frombuffer(raw, dtype=dt).copy()

    def done(self):
        if self.offset != len(self.data):
            raise FormatError(
                f"{self.name}: {len(self.data) - self.offset} trailing bytes "
                f"at offset {self.offset}")


def save_dataset(trials, path):
    """Write trials to an MRCD file (samples stored as float32)."""
    if len(trials) == 0:
        raise ValueError("no trials to save")
    n_ch, n_s = trials[0].samples.shape
    rate = trials[0].sampling_rate_hz
    for t in trials:
        if t.samples.shape != (n_ch, n_s) or t.sampling_rate_hz != rate:
            raise ValueError("trials must share shape and sampling rate")
    out = bytearray()
    out += DATASET_MAGIC
    out += struct.pack("<HHIHIf", FORMAT_VERSION, 0, len(trials), n_ch, n_s, rate)
    labels = bytes(UNLABELED if t.label is None else int(t.label) for t in trials)
    out += labels
    for t in trials:
        out += np.ascontiguousarray(t.samples, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(bytes(out))


def load_dataset(path):
    with open(path, "rb") as f:
        r = _Reader(f.read(), str(path))
    if r.take(4) != DATASET_MAGIC:
        raise FormatError(f"{path}: bad magic (not an MRCD dataset)")
    version, _reserved, n_trials, n_ch, n_s, rate = r.unpack("HHIHIf")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    labels = r.array("u1", n_trials)
    trials = []
    for i in range(n_trials):
        samples = r.array("<f4", n_ch * n_s).astype(np.float64).reshape(n_ch, n_s)
        label = None if labels[i] == UNLABELED else int(labels[i])
        trials.append(TrialWindow(samples, label, float(rate)))
    r.done()
    return trials


def _triu_values(mat: np.ndarray) -> np.ndarray:
    n = mat.shape[0]
    return mat[np.triu_indices(n)]


def _from_triu(values: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=values.dtype)
    out[np.triu_indices(n)] = values
    return out + np.triu(out, 1).T


def save_model(model: ModelParams, path):
    n = model.n_channels
    classes, features = model.svm.weights.shape
    out = bytearray()
    out += MODEL_MAGIC
    out += struct.pack("<H", FORMAT_VERSION)
    out += struct.pack("<IIII", model.n_bands, n, features, classes)
    for casc in model.cascades:
        out += struct.pack("<H", len(casc.sections))
        for s in casc.sections:
            out += np.asarray([*s.b, *s.a], dtype="<i2").tobytes()
            out += struct.pack("<bB", s.coeff_exponent, s.output_shift)
    for b in range(model.n_bands):
        out += struct.pack("<BB", model.cov_shift[b], model.whiten_shift[b])
    for b in range(model.n_bands):
        out += np.asarray(_triu_values(model.cref[b].values), dtype="<i2").tobytes()
        out += struct.pack("<b", model.cref[b].exponent)
    out += struct.pack("<b", model.feature_exponent)
    out += np.asarray(model.svm.weights, dtype="<i1").tobytes()
    out += struct.pack("<b", model.svm.weight_exponent)
    out += np.asarray(model.svm.biases, dtype="<i4").tobytes()

    shadow = [model.rho, model.lambda_min, float(model.input_exponent),
              float(model.n_samples), model.sampling_rate_hz,
              model.window_offset_seconds]
    for b in range(model.n_bands):
        band = model.bands[b]
        shadow += [band.low_hz, band.high_hz]
        for s in model.float_sections[b]:
            shadow += [s.b0, s.b1, s.b2, s.a1, s.a2]
        shadow.append(float(model.cascades[b].output_exponent))
        shadow += [float(s.gain_exponent) for s in model.cascades[b].sections]
        shadow += list(_triu_values(model.cref_float[b]))
    shadow += list(model.svm_float.weights.ravel())
    shadow += list(model.svm_float.biases)
    out += np.asarray(shadow, dtype="<f8").tobytes()
    with open(path, "wb") as f:
        f.write(bytes(out))


def load_model(path) -> ModelParams:
    with open(path, "rb") as f:
        r = _Reader(f.read(), str(path))
    if r.take(4) != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic (not an MRCM model)")
    version = r.unpack("H")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    n_bands, n, features, classes = r.unpack("IIII")
    tri = vect_length(n)
    if features != n_bands * tri:
        raise FormatError(f"{path}: dimensions block is inconsistent")

    raw_sections = []
    for _ in range(n_bands):
        count = r.unpack("H")
        secs = []
        for _ in range(count):
            coeffs = r.array("<i2", 5).astype(np.int64)
            ce, oshift = r.unpack("bB")
            secs.append((coeffs, ce, oshift))
        raw_sections.append(secs)
    cov_shift = []
    whiten_shift = []
    for _ in range(n_bands):
        cs, ws = r.unpack("BB")
        cov_shift.append(cs)
        whiten_shift.append(ws)
    cref_raw = []
    for _ in range(n_bands):
        vals = r.array("<i2", tri).astype(np.int64)
        exp = r.unpack("b")
        cref_raw.append((vals, exp))
    feature_exponent = r.unpack("b")
    weights = r.array("<i1", classes * features).astype(np.int64).reshape(classes, features)
    weight_exponent = r.unpack("b")
    biases = r.array("<i4", classes).astype(np.int64)

    n_shadow = (len(r.data) - r.offset) // 8
    shadow = r.array("<f8", n_shadow)
    r.done()
    pos = 0

    def next_vals(count):
        nonlocal pos
        if pos + count > len(shadow):
            raise FormatError(f"{path}: float shadow block too short")
        vals = shadow[pos:pos + count]
        pos += count
        return vals

    rho, lambda_min, input_exponent, n_samples, rate, offset_s = next_vals(6)
    bands = []
    float_sections = []
    cascades = []
    cref_float = []
    cref = []
    for b in range(n_bands):
        lo, hi = next_vals(2)
        bands.append(BandSpec(float(lo), float(hi), float(rate)))
        secs = []
        for _ in range(len(raw_sections[b])):
            c = next_vals(5)
            secs.append(SosSection(*[float(v) for v in c]))
        float_sections.append(secs)
        out_exp = int(next_vals(1)[0])
        gains = [int(g) for g in next_vals(len(raw_sections[b]))]
        qsecs = [QuantizedSosSection(coeffs[:3], coeffs[3:], ce, oshift, g)
                 for (coeffs, ce, oshift), g in zip(raw_sections[b], gains)]
        cascades.append(QuantizedSosCascade(qsecs, int(input_exponent), out_exp))
        fref = _from_triu(next_vals(tri).copy(), n)
        cref_float.append(fref)
        vals, exp = cref_raw[b]
        cref.append(FixedMatrix(_from_triu(vals, n), 11, exp, symmetric=True))
    fw = next_vals(classes * features).reshape(classes, features).copy()
    fb = next_vals(classes).copy()
    if pos != len(shadow):
        raise FormatError(f"{path}: {len(shadow) - pos} unused shadow values")

    return ModelParams(
        bands=bands, float_sections=float_sections, cascades=cascades,
        cref_float=cref_float, cref=cref, cov_shift=cov_shift,
        whiten_shift=whiten_shift, feature_exponent=feature_exponent,
        svm_float=FloatSvm(fw, fb),
        svm=SvmParams(weights, weight_exponent, biases,
                      weight_exponent + feature_exponent),
        rho=float(rho), lambda_min=float(lambda_min), n_channels=n,
        n_samples=int(n_samples), sampling_rate_hz=float(rate),
        input_exponent=int(input_exponent),
        window_offset_seconds=float(offset_s))


def import_csv_manifest(manifest_path):
    """Load trials from CSV files listed in a manifest.

    Manifest lines are ``path,label`` (path relative to the manifest,
    label empty or 255 for unlabeled); ``rate = <hz>`` sets the
    sampling rate (default 250); ``#`` starts a comment.  Each CSV has
    one header row of channel names and one row per sample.
    """
    import csv
    from pathlib import Path

    manifest_path = Path(manifest_path)
    rate = 250.0
    entries = []
    with open(manifest_path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line and line.split("=", 1)[0].strip() == "rate":
                rate = float(line.split("=", 1)[1])
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise FormatError(
                    f"{manifest_path}:{lineno}: expected 'path,label'")
            label = None if parts[1] in ("", str(UNLABELED)) else int(parts[1])
            entries.append((manifest_path.parent / parts[0], label))

    trials = []
    for path, label in entries:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        if len(rows) < 2:
            raise FormatError(f"{path}: need a header row and samples")
        n_ch = len(rows[0])
        data = np.array([[float(v) for v in row] for row in rows[1:]])
        if data.shape[1] != n_ch:
            raise FormatError(f"{path}: ragged rows")
        trials.append(TrialWindow(data.T, label, rate))
    return trials
