"""Seeded synthetic 4-class motor-imagery-like EEG generator.

Each class is defined by elevated band-limited power on a fixed channel
subset over a pink-noise background: one narrowband source per class,
mixed into its channels with class-specific weights, so class
membership shows up both in per-channel band power and in the
cross-channel covariance structure that the feature extraction keys on.
Everything is drawn from one seeded generator; identical seeds give
bit-identical datasets.
"""

from __future__ import annotations

import numpy as np
import scipy.signal

__all__ = ["CLASS_SIGNATURES", "synthetic_trials"]

# (center frequency Hz, channel subset) per class
CLASS_SIGNATURES = (
    (9.0, (0, 1, 2, 3, 4, 5, 6, 7)),
    (13.0, (7, 8, 9, 10, 11, 12, 13, 14)),
    (21.0, (14, 15, 16, 17, 18, 19, 20, 21)),
    (29.0, (0, 1, 2, 18, 19, 20, 21, 10)),
)


def _pink_noise(rng, n_channels, n_samples):
    """Approximate 1/f amplitude spectrum via FFT shaping."""
    white = rng.standard_normal((n_channels, n_samples))
    spec = np.fft.rfft(white, axis=1)
    f = np.fft.rfftfreq(n_samples)
    f[0] = f[1]
    spec /= np.sqrt(f)
    pink = np.fft.irfft(spec, n=n_samples, axis=1)
    return pink / pink.std()


def _band_source(rng, center_hz, n_samples, rate_hz, half_width_hz=1.0):
    sos = scipy.signal.butter(2, [center_hz - half_width_hz, center_hz + half_width_hz],
                              btype="bandpass", fs=rate_hz, output="sos")
    src = scipy.signal.sosfilt(sos, rng.standard_normal(n_samples + 256))[256:]
    std = src.std()
    return src / std if std > 0 else src


def synthetic_trials(n_trials: int, seed: int = 0, n_channels: int = 22,
                     n_samples: int = 875, sampling_rate_hz: float = 250.0,
                     snr: float = 2.5):
    """Generate labelled trials; returns (list of (samples, label))."""
    rng = np.random.default_rng(seed)
    n_classes = len(CLASS_SIGNATURES)
    labels = np.arange(n_trials) % n_classes
    rng.shuffle(labels)

    # fixed per-class mixing weights so the spatial pattern is stable
    mix_rng = np.random.default_rng(seed + 1)
    mixings = [0.5 + mix_rng.random(len(chs)) for _, chs in CLASS_SIGNATURES]

    trials = []
    for label in labels:
        center_hz, channels = CLASS_SIGNATURES[label]
        x = _pink_noise(rng, n_channels, n_samples)
        src = _band_source(rng, center_hz, n_samples, sampling_rate_hz)
        for w, ch in zip(mixings[label], channels):
            x[ch % n_channels] += snr * w * src
        trials.append((x, int(label)))
    return trials
