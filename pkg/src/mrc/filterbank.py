"""Bandpass filter bank: float design and 12-bit fixed-point cascades.

The filter bank is a set of Butterworth bandpass filters (analog
prototype, bilinear transform) realized as cascades of second-order
sections.  The fixed-point form follows a Direct-Form I discipline:

  * coefficients are 12-bit signed integers sharing one power-of-two
    exponent per section,
  * every section's recursion state is a 16-bit register holding the
    section output at full register occupancy,
  * streams between sections (and the cascade input/output) are 8-bit,
    reached through power-of-two right shifts with round-half-up.

Because the designed cascades concentrate the passband gain in one
section, each section is rebalanced by a power of two before
quantization so that its output uses the 16-bit register range; the
rebalancing exponents and the inter-section shifts are chosen on a
seeded calibration sweep (band-center sinusoid plus white noise at full
scale) leaving one bit of headroom at each boundary.  All of these
scale moves are exact powers of two, so the cascade's overall scale is
recovered in ``output_exponent``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .fixedpoint import _round_half_away, shift_round_half_up, signed_max, signed_min

__all__ = [
    "FilterDesignError",
    "BandSpec",
    "SosSection",
    "QuantizedSosSection",
    "QuantizedSosCascade",
    "default_bands",
    "design_bandpass",
    "quantize_section",
    "quantize_cascade",
    "filter_apply_float",
    "filter_apply_quant",
    "filter_apply_quant_bank",
    "cascade_response",
]

DEFAULT_RATE_HZ = 250.0
CALIBRATION_SWEEP_LEN = 2048


class FilterDesignError(ValueError):
    pass


@dataclass(frozen=True)
class BandSpec:
    """Passband edges of one filter, in Hz."""

    low_hz: float
    high_hz: float
    sampling_rate_hz: float = DEFAULT_RATE_HZ

    def __post_init__(self):
        if not 0 < self.low_hz < self.high_hz < self.sampling_rate_hz / 2:
            raise FilterDesignError("band edges out of range")

    @property
    def center_hz(self) -> float:
        return 0.5 * (self.low_hz + self.high_hz)


@dataclass(frozen=True)
class SosSection:
    """One biquad, a0 normalized to 1."""

    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    @property
    def is_stable(self) -> bool:
        return abs(self.a2) < 1 and abs(self.a1) < 1 + self.a2

    def feedforward(self):
        return np.array([self.b0, self.b1, self.b2])

    def feedback(self):
        return np.array([self.a1, self.a2])


@dataclass
class QuantizedSosSection:
    """Integer biquad with its shift schedule.

    Effective float coefficients are ``int * 2**coeff_exponent``; the
    feedforward side additionally carries the folded-in rebalancing
    gain ``2**gain_exponent``.  ``output_shift`` is the right shift
    applied to the 16-bit section output to form the 8-bit stream fed
    to the next stage.
    """

    b: np.ndarray
    a: np.ndarray
    coeff_exponent: int
    output_shift: int
    gain_exponent: int = 0

    def scaled_section(self) -> SosSection:
        """Float view of the stored integers (rebalancing gain included)."""
        e = 2.0 ** self.coeff_exponent
        return SosSection(self.b[0] * e, self.b[1] * e, self.b[2] * e,
                          self.a[0] * e, self.a[1] * e)

    def dequantized_section(self) -> SosSection:
        """Float view with the rebalancing gain divided back out."""
        e = 2.0 ** self.coeff_exponent
        g = 2.0 ** (-self.gain_exponent)
        return SosSection(self.b[0] * e * g, self.b[1] * e * g, self.b[2] * e * g,
                          self.a[0] * e, self.a[1] * e)


@dataclass
class QuantizedSosCascade:
    sections: list
    input_exponent: int = -7
    output_exponent: int = -7
    coeff_bits: int = 12
    stream_bits: int = 8
    register_bits: int = 16

    @property
    def macs_per_sample(self) -> int:
        # 3 feedforward + 2 feedback per section
        return 5 * len(self.sections)

    @property
    def shifts_per_sample(self) -> int:
        return 2 * len(self.sections)

    @property
    def scale_steps(self) -> int:
        return self.output_exponent - self.input_exponent

    def with_input_exponent(self, input_exponent: int) -> "QuantizedSosCascade":
        """Rebind the stream scale; the shift schedule is scale-free."""
        steps = self.scale_steps
        return QuantizedSosCascade(self.sections, input_exponent,
                                   input_exponent + steps, self.coeff_bits,
                                   self.stream_bits, self.register_bits)


def default_bands(sampling_rate_hz: float = DEFAULT_RATE_HZ):
    """18 contiguous 2 Hz bands covering 4..40 Hz."""
    return [BandSpec(lo, lo + 2.0, sampling_rate_hz)
            for lo in np.arange(4.0, 40.0, 2.0)]


def design_bandpass(band: BandSpec, order: int = 2):
    """Butterworth bandpass as ``order`` second-order sections.

    The band edges sit at the Butterworth -3 dB points.
    """
    if order < 1:
        raise FilterDesignError("order must be >= 1")
    sos = scipy.signal.butter(order, [band.low_hz, band.high_hz],
                              btype="bandpass", fs=band.sampling_rate_hz,
                              output="sos")
    return [SosSection(r[0], r[1], r[2], r[4], r[5]) for r in sos]


def cascade_response(sections, freqs_hz, sampling_rate_hz: float):
    """Direct evaluation of the cascade transfer function on the unit circle."""
    w = 2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / sampling_rate_hz
    z1 = np.exp(-1j * w)
    z2 = z1 * z1
    h = np.ones_like(z1)
    for s in sections:
        h = h * (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2)
    return h


def filter_apply_float(x, sections):
    """Float cascade with zero initial state, same length as the input."""
    sos = np.array([[s.b0, s.b1, s.b2, 1.0, s.a1, s.a2] for s in sections])
    return scipy.signal.sosfilt(sos, np.asarray(x, dtype=np.float64), axis=-1)


def _coeff_exponent(coeffs, bits: int) -> int:
    """Smallest power-of-two range whose `bits`-bit grid holds all coeffs."""
    m = float(np.max(np.abs(coeffs)))
    if m == 0:
        return -(bits - 1)
    e = math.ceil(math.log2(m / signed_max(bits)))
    # rounding at the boundary may still spill over one step
    while _round_half_away(m / 2.0 ** e) > signed_max(bits):
        e += 1
    return e


def quantize_section(section: SosSection, coeff_bits: int = 12,
                     gain_exponent: int = 0, output_shift: int = 0) -> QuantizedSosSection:
    """Quantize one biquad; the feedforward side is scaled by 2**gain_exponent."""
    g = 2.0 ** gain_exponent
    coeffs = np.array([section.b0 * g, section.b1 * g, section.b2 * g,
                       section.a1, section.a2])
    e = _coeff_exponent(coeffs, coeff_bits)
    q = _round_half_away(coeffs / 2.0 ** e).astype(np.int64)
    q = np.clip(q, signed_min(coeff_bits), signed_max(coeff_bits))
    sec = QuantizedSosSection(q[:3], q[3:], e, output_shift, gain_exponent)
    if not sec.scaled_section().is_stable:
        raise FilterDesignError("quantized filter unstable")
    return sec


def _calibration_sweep(sections, sampling_rate_hz: float, seed: int):
    """Band-center sinusoid plus white noise, normalized to full scale."""
    grid = np.linspace(0.0, sampling_rate_hz / 2, 2049)[1:-1]
    mag = np.abs(cascade_response(sections, grid, sampling_rate_hz))
    center = grid[int(np.argmax(mag))]
    t = np.arange(CALIBRATION_SWEEP_LEN)
    rng = np.random.default_rng(seed)
    x = np.sin(2.0 * np.pi * center / sampling_rate_hz * t) + rng.uniform(-1, 1, t.size)
    return x / np.max(np.abs(x))


def quantize_cascade(sections, coeff_bits: int = 12, *,
                     sampling_rate_hz: float = DEFAULT_RATE_HZ,
                     input_exponent: int = -7,
                     seed: int = 0) -> QuantizedSosCascade:
    """Quantize a float cascade to the 12/16/8-bit shift-schedule form.

    Per section, the calibration sweep fixes (a) the power-of-two
    rebalancing gain that fills the 16-bit output register up to one
    headroom bit, and (b) the output shift that brings the stream back
    to 8-bit range, again with one headroom bit.  Raises
    FilterDesignError if any quantized section loses stability.
    """
    for s in sections:
        if not s.is_stable:
            raise FilterDesignError("float cascade unstable")
    sweep = _calibration_sweep(sections, sampling_rate_hz, seed)

    stream_bits = 8
    register_bits = 16
    reg_target = signed_max(register_bits) + 1  # one headroom bit: <= 2**14
    stream_target_bits = stream_bits - 2        # one headroom bit: <= 63

    u = sweep * signed_max(stream_bits)  # full-scale 8-bit occupancy, float sim
    qsections = []
    scale_steps = 0
    for section in sections:
        y = filter_apply_float(u, [section])
        peak = float(np.max(np.abs(y)))
        if peak == 0:
            gain_exp = 0
        else:
            # fill the 16-bit register up to one headroom bit ...
            g_reg = math.floor(math.log2(reg_target / 2 / peak))
            # ... but never past the point where the scaled feedforward
            # coefficients would coarsen the grid the feedback
            # coefficients need (shared per-section exponent)
            e_fb = _coeff_exponent(section.feedback(), coeff_bits)
            bmax = float(np.max(np.abs(section.feedforward())))
            if bmax > 0:
                g_prec = math.floor(math.log2(signed_max(coeff_bits) * 2.0 ** e_fb / bmax))
                gain_exp = min(g_reg, g_prec)
            else:
                gain_exp = g_reg
        y = y * 2.0 ** gain_exp
        peak_int = int(math.ceil(float(np.max(np.abs(y)))))
        out_shift = max(0, peak_int.bit_length() - stream_target_bits)
        qsec = quantize_section(section, coeff_bits, gain_exp, out_shift)
        qsections.append(qsec)
        u = y / 2.0 ** out_shift
        scale_steps += out_shift - gain_exp
    return QuantizedSosCascade(qsections, input_exponent,
                               input_exponent + scale_steps, coeff_bits,
                               stream_bits, register_bits)


def filter_apply_quant(x, cascade: QuantizedSosCascade):
    """Integer Direct-Form I cascade, bit-exact and saturating.

    ``x`` holds 8-bit-range integers (any leading shape, time last).
    Per section and sample: five MACs into a wide accumulator, a
    right shift with round-half-up into the 16-bit output register,
    and a second shift down to the 8-bit stream for the next stage.
    """
    u = np.asarray(x, dtype=np.int64)
    stream_lo = signed_min(cascade.stream_bits)
    stream_hi = signed_max(cascade.stream_bits)
    reg_lo = signed_min(cascade.register_bits)
    reg_hi = signed_max(cascade.register_bits)
    for sec in cascade.sections:
        u = _section_apply_quant(u, sec, reg_lo, reg_hi, stream_lo, stream_hi)
    return u


def _feedforward_taps(u, b0, b1, b2):
    """b0*u[t] + b1*u[t-1] + b2*u[t-2] along time, zero history (exact)."""
    ff = b0 * u
    ff[..., 1:] += b1 * u[..., :-1]
    ff[..., 2:] += b2 * u[..., :-2]
    return ff


def _section_apply_quant(u, sec, reg_lo, reg_hi, stream_lo, stream_hi):
    b0, b1, b2 = (int(v) for v in sec.b)
    a1, a2 = (int(v) for v in sec.a)
    k = -sec.coeff_exponent
    if k < 0:
        raise FilterDesignError("coefficient exponent must be <= 0")
    sig = sec.output_shift
    n = u.shape[-1]
    lead = u.shape[:-1]
    out = np.empty_like(u)
    ff = _feedforward_taps(u, b0, b1, b2)
    v1 = np.zeros(lead, dtype=np.int64)
    v2 = np.zeros(lead, dtype=np.int64)
    for t in range(n):
        acc = ff[..., t] - a1 * v1 - a2 * v2
        v = np.clip(shift_round_half_up(acc, k), reg_lo, reg_hi)
        out[..., t] = np.clip(shift_round_half_up(v, sig), stream_lo, stream_hi)
        v2, v1 = v1, v
    return out


def filter_apply_quant_bank(x, cascades):
    """Run one multichannel window through every band's cascade at once.

    Semantically identical (bit-exact) to calling
    :func:`filter_apply_quant` per cascade; the per-band recursions are
    carried side by side so the time loop is shared.  Requires all
    cascades to have the same section count.
    """
    x = np.asarray(x, dtype=np.int64)
    nb = len(cascades)
    nsec = len(cascades[0].sections)
    if any(len(c.sections) != nsec for c in cascades):
        return np.stack([filter_apply_quant(x, c) for c in cascades])

    n_ch, n = x.shape
    stream_lo = signed_min(cascades[0].stream_bits)
    stream_hi = signed_max(cascades[0].stream_bits)
    reg_lo = signed_min(cascades[0].register_bits)
    reg_hi = signed_max(cascades[0].register_bits)

    # (nsec, nb, 1) coefficient and shift columns broadcast over channels
    B = np.empty((nsec, 3, nb, 1), dtype=np.int64)
    A = np.empty((nsec, 2, nb, 1), dtype=np.int64)
    kshift = np.empty((nsec, nb, 1), dtype=np.int64)
    oshift = np.empty((nsec, nb, 1), dtype=np.int64)
    for j in range(nsec):
        for i, c in enumerate(cascades):
            s = c.sections[j]
            B[j, :, i, 0] = s.b
            A[j, :, i, 0] = s.a
            kshift[j, i, 0] = -s.coeff_exponent
            oshift[j, i, 0] = s.output_shift
    khalf = np.where(kshift > 0, 1 << np.maximum(kshift - 1, 0), 0)
    ohalf = np.where(oshift > 0, 1 << np.maximum(oshift - 1, 0), 0)

    cur = np.broadcast_to(x, (nb, n_ch, n))
    out = np.empty((nb, n_ch, n), dtype=np.int64)
    for j in range(nsec):
        v1 = np.zeros((nb, n_ch), dtype=np.int64)
        v2 = np.zeros((nb, n_ch), dtype=np.int64)
        a1, a2 = A[j, 0], A[j, 1]
        kj, oj = kshift[j], oshift[j]
        khj, ohj = khalf[j], ohalf[j]
        ff = _feedforward_taps(np.ascontiguousarray(cur), B[j, 0][..., None],
                               B[j, 1][..., None], B[j, 2][..., None])
        for t in range(n):
            acc = ff[..., t] - a1 * v1 - a2 * v2
            # the half offsets are pre-zeroed where a shift is 0, so a
            # plain arithmetic shift realizes round-half-up everywhere
            v = np.clip((acc + khj) >> kj, reg_lo, reg_hi)
            out[..., t] = np.clip((v + ohj) >> oj, stream_lo, stream_hi)
            v2, v1 = v1, v
        cur = out.copy() if j < nsec - 1 else out
    return out
