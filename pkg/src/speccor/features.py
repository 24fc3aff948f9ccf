"""Log-mel feature pipeline: mel filterbank, correction-aware extraction, and per-bin standardization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .correction import CorrectionCoefficients, apply_to_amplitudes
from .dsp import AMPLITUDE_FLOOR, AmplitudeSpectrogram, bin_frequencies

VARIANCE_FLOOR = 1e-8

GROUPINGS = ("global", "per_device")
NORMALIZATIONS = ("raw",) + GROUPINGS


def hz_to_mel(f):
    """HTK mel scale."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular mel filters as a non-negative (n_mels x F) weight matrix."""

    weights: np.ndarray
    n_mels: int
    f_min: float
    f_max: float
    n_fft: int
    sample_rate: int
    center_frequencies: np.ndarray
    mel_scale: str = "htk"
    norm: str = "none"

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        centers = np.asarray(self.center_frequencies, dtype=np.float64)
        if weights.shape != (self.n_mels, self.n_fft // 2 + 1):
            raise ValueError(
                f"weights must be (n_mels, n_fft//2+1) = "
                f"({self.n_mels}, {self.n_fft // 2 + 1}), got {weights.shape}")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("filter weights must be finite and non-negative")
        row_peaks = weights.max(axis=1)
        if np.any(row_peaks == 0):
            empty = int(np.argmin(row_peaks))
            raise ValueError(f"filter row {empty} is empty")
        for m in range(self.n_mels):
            peak = int(np.argmax(weights[m]))
            rising = np.diff(weights[m, :peak + 1])
            falling = np.diff(weights[m, peak:])
            if np.any(rising < -1e-12 * row_peaks[m]) or np.any(falling > 1e-12 * row_peaks[m]):
                raise ValueError(f"filter row {m} is not unimodal")
        if centers.size != self.n_mels or np.any(np.diff(centers) <= 0):
            raise ValueError("center frequencies must be strictly increasing, one per filter")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "center_frequencies", centers)


@dataclass(frozen=True)
class FeatureTensor:
    """Log-mel features (frames x n_mels) with normalization provenance."""

    values: np.ndarray
    normalization: str = "raw"
    stats_id: str = ""
    correction: str = "none"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"feature values must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}, "
                             f"got {self.normalization!r}")
        object.__setattr__(self, "values", values)

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_mels(self) -> int:
        return self.values.shape[1]


def _triangle_band_average(left: float, center: float, right: float,
                           lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Average of a unit triangle over each interval [lo, hi].

    Integrating over the bin's frequency extent (rather than sampling the
    bin center) keeps every filter non-empty even when triangles are
    narrower than the bin spacing.
    """
    # Rising edge (x - left)/(center - left) over [left, center].
    x0 = np.clip(lo, left, center)
    x1 = np.clip(hi, left, center)
    up = ((x1 - left) ** 2 - (x0 - left) ** 2) / (2.0 * (center - left))
    # Falling edge (right - x)/(right - center) over [center, right].
    y0 = np.clip(lo, center, right)
    y1 = np.clip(hi, center, right)
    down = ((right - y0) ** 2 - (right - y1) ** 2) / (2.0 * (right - center))
    return (up + down) / (hi - lo)


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int = 256,
                   f_min: float = 0.0, f_max: Optional[float] = None,
                   norm: str = "none") -> MelFilterbank:
    """Triangular filters with HTK-mel-spaced centers on the STFT bin grid.

    norm "none" leaves unit-height triangles; "area" scales each row to unit
    total weight. The mode is recorded on the filterbank.
    """
    nyquist = sample_rate / 2.0
    if f_max is None:
        f_max = nyquist
    if not (0.0 <= f_min < f_max <= nyquist):
        raise ValueError(f"invalid band: need 0 <= f_min < f_max <= {nyquist}, "
                         f"got [{f_min}, {f_max}]")
    if n_mels < 1:
        raise ValueError(f"n_mels must be >= 1, got {n_mels}")
    if norm not in ("none", "area"):
        raise ValueError(f"norm must be 'none' or 'area', got {norm!r}")

    points = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    freqs = bin_frequencies(n_fft, sample_rate)
    half_width = sample_rate / n_fft / 2.0
    lo = np.clip(freqs - half_width, 0.0, nyquist)
    hi = np.clip(freqs + half_width, 0.0, nyquist)

    weights = np.zeros((n_mels, freqs.size))
    for m in range(n_mels):
        weights[m] = _triangle_band_average(points[m], points[m + 1], points[m + 2], lo, hi)
    if norm == "area":
        weights /= weights.sum(axis=1, keepdims=True)
    return MelFilterbank(weights, n_mels, f_min, f_max, n_fft, sample_rate,
                         points[1:-1], "htk", norm)


def extract(a: AmplitudeSpectrogram, fb: MelFilterbank,
            c: Optional[CorrectionCoefficients] = None,
            floor: float = AMPLITUDE_FLOOR) -> FeatureTensor:
    """Log-mel features; correction, when given, is applied before the mel
    projection. The tensor records whether that happened."""
    if fb.n_fft != a.n_fft or fb.sample_rate != a.sample_rate:
        raise ValueError(
            f"shape mismatch: filterbank built for n_fft={fb.n_fft}@{fb.sample_rate} Hz, "
            f"spectrogram is n_fft={a.n_fft}@{a.sample_rate} Hz")
    correction = "none"
    if c is not None:
        a = apply_to_amplitudes(c, a)
        correction = f"pre_mel:{c.source_device}->{c.reference_device}"
    mel = a.mags @ fb.weights.T
    values = np.log(np.maximum(mel, floor))
    return FeatureTensor(values, "raw", "", correction)


def standardize(features: Sequence[FeatureTensor], grouping: str = "global",
                device_labels: Optional[Sequence[str]] = None):
    """Zero-mean unit-variance scaling per mel bin over a group's frames.

    grouping "global" pools everything; "per_device" computes statistics
    separately per device label. Returns (tensors, stats) where stats maps
    group id -> (mean, std).
    """
    features = list(features)
    if grouping not in GROUPINGS:
        raise ValueError(f"grouping must be one of {GROUPINGS}, got {grouping!r}")
    if grouping == "per_device":
        if device_labels is None or len(device_labels) != len(features):
            raise ValueError("per_device standardization requires one device label "
                             "per feature tensor")
        keys = [f"device:{label}" for label in device_labels]
    else:
        keys = ["global"] * len(features)

    grouped: dict = {}
    for key, feat in zip(keys, features):
        grouped.setdefault(key, []).append(feat.values)

    stats = {}
    for key, mats in grouped.items():
        stacked = np.concatenate(mats, axis=0)
        mean = stacked.mean(axis=0)
        std = np.sqrt(np.maximum(stacked.var(axis=0), VARIANCE_FLOOR))
        stats[key] = (mean, std)

    out = []
    for key, feat in zip(keys, features):
        mean, std = stats[key]
        out.append(FeatureTensor((feat.values - mean) / std, grouping, key,
                                 feat.correction))
    return out, stats
