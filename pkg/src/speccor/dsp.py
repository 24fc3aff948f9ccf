"""Core signal primitives: framing, windowed STFT/iSTFT, magnitudes, geometric means, convolution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as _sig

# Linear amplitudes below this are clamped before taking logs. Far below any
# real signal level; only guards against log(0).
AMPLITUDE_FLOOR = 1e-10

# Band used for decibel comparisons. DC/Nyquist and the band edges are
# excluded: window leakage makes them ill-conditioned.
MIDBAND_HZ = (100.0, 16000.0)

DB_PER_NAT = 20.0 / np.log(10.0)


def to_db(ratio):
    """Convert a linear amplitude ratio to decibels."""
    return 20.0 * np.log10(ratio)


def window_array(name: str, n_fft: int) -> np.ndarray:
    """Periodic analysis window of length ``n_fft`` for the given name."""
    try:
        return np.asarray(_sig.get_window(name, n_fft, fftbins=True), dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"unknown window {name!r}") from exc


def bin_frequencies(n_fft: int, sample_rate: int) -> np.ndarray:
    """Center frequencies in Hz of the one-sided FFT bins."""
    return np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)


def band_bins(n_fft: int, sample_rate: int, f_lo: float = MIDBAND_HZ[0],
              f_hi: float = MIDBAND_HZ[1]) -> np.ndarray:
    """Indices of the bins whose center frequencies lie in [f_lo, f_hi]."""
    freqs = bin_frequencies(n_fft, sample_rate)
    return np.nonzero((freqs >= f_lo) & (freqs <= f_hi))[0]


@dataclass(frozen=True)
class Waveform:
    """Mono audio samples (nominal range [-1, 1]) at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"waveform samples must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class ComplexSpectrogram:
    """One-sided complex STFT, laid out frames x bins with F = n_fft//2 + 1."""

    bins: np.ndarray
    n_fft: int
    hop: int
    sample_rate: int
    window_name: str

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.complex128)
        if bins.ndim != 2 or bins.shape[0] < 1:
            raise ValueError(f"spectrogram must be a non-empty 2-D matrix, got shape {bins.shape}")
        if bins.shape[1] != self.n_fft // 2 + 1:
            raise ValueError(
                f"bin count {bins.shape[1]} inconsistent with n_fft={self.n_fft} "
                f"(expected {self.n_fft // 2 + 1})")
        object.__setattr__(self, "bins", bins)

    @property
    def frames(self) -> int:
        return self.bins.shape[0]

    @property
    def freq_bins(self) -> int:
        return self.bins.shape[1]

    def bin_frequencies(self) -> np.ndarray:
        return bin_frequencies(self.n_fft, self.sample_rate)


@dataclass(frozen=True)
class AmplitudeSpectrogram:
    """Non-negative magnitude matrix (frames x bins) plus the STFT metadata."""

    mags: np.ndarray
    n_fft: int
    hop: int
    sample_rate: int
    window_name: str

    def __post_init__(self):
        mags = np.asarray(self.mags, dtype=np.float64)
        if mags.ndim != 2 or mags.shape[0] < 1:
            raise ValueError(f"spectrogram must be a non-empty 2-D matrix, got shape {mags.shape}")
        if mags.shape[1] != self.n_fft // 2 + 1:
            raise ValueError(
                f"bin count {mags.shape[1]} inconsistent with n_fft={self.n_fft} "
                f"(expected {self.n_fft // 2 + 1})")
        if not np.all(np.isfinite(mags)) or np.any(mags < 0):
            raise ValueError("magnitudes must be finite and non-negative")
        object.__setattr__(self, "mags", mags)

    @property
    def frames(self) -> int:
        return self.mags.shape[0]

    @property
    def freq_bins(self) -> int:
        return self.mags.shape[1]

    def bin_frequencies(self) -> np.ndarray:
        return bin_frequencies(self.n_fft, self.sample_rate)


def stft(w: Waveform, n_fft: int = 2048, hop: int = 512,
         window: str = "hann") -> ComplexSpectrogram:
    """Short-time Fourier transform without center padding.

    Frame t covers samples [t*hop, t*hop + n_fft), so every frame lies fully
    inside the signal and edge frames are directly comparable against
    time-domain processing of the same samples.
    """
    if n_fft < 16 or n_fft % 2 != 0:
        raise ValueError(f"n_fft must be an even integer >= 16, got {n_fft}")
    if hop < 1:
        raise ValueError(f"hop must be >= 1, got {hop}")
    if len(w) < n_fft:
        raise ValueError(f"input too short: {len(w)} samples < n_fft={n_fft}")
    win = window_array(window, n_fft)
    frames = sliding_window_view(w.samples, n_fft)[::hop]
    bins = np.fft.rfft(frames * win, axis=1)
    return ComplexSpectrogram(bins, n_fft, hop, w.sample_rate, window)


def istft(c: ComplexSpectrogram) -> Waveform:
    """Windowed overlap-add resynthesis.

    Output length is (T-1)*hop + n_fft. Samples more than n_fft away from
    either end reconstruct the analyzed signal exactly; edge samples are
    renormalized by the partial window overlap.
    """
    win = window_array(c.window_name, c.n_fft)
    if c.hop > c.n_fft or not _sig.check_NOLA(win, c.n_fft, c.n_fft - c.hop):
        raise ValueError(
            f"reconstruction condition violated: window {c.window_name!r} with "
            f"hop={c.hop}, n_fft={c.n_fft} is not invertible")
    frames = np.fft.irfft(c.bins, n=c.n_fft, axis=1) * win
    length = (c.frames - 1) * c.hop + c.n_fft
    acc = np.zeros(length)
    scale = np.zeros(length)
    wsq = win * win
    for t in range(c.frames):
        start = t * c.hop
        acc[start:start + c.n_fft] += frames[t]
        scale[start:start + c.n_fft] += wsq
    valid = scale > 1e-11 * scale.max()
    out = np.where(valid, acc / np.where(valid, scale, 1.0), 0.0)
    return Waveform(out, c.sample_rate)


def amplitude(c: ComplexSpectrogram) -> AmplitudeSpectrogram:
    """Entry-wise modulus; metadata is carried over unchanged."""
    return AmplitudeSpectrogram(np.abs(c.bins), c.n_fft, c.hop, c.sample_rate, c.window_name)


def geometric_mean(values, floor: float = AMPLITUDE_FLOOR) -> float:
    """Geometric mean over all elements, computed in the log domain.

    Values below ``floor`` are clamped before the log. Uses numpy's pairwise
    summation, so the result is bit-stable for a fixed input ordering.
    """
    if floor <= 0:
        raise ValueError(f"floor must be positive, got {floor}")
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("geometric mean of empty input")
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise ValueError("values must be finite and non-negative")
    return float(np.exp(np.mean(np.log(np.maximum(v, floor)))))


def convolve(w: Waveform, taps, method: str = "auto") -> Waveform:
    """Full linear convolution of a waveform with a tap sequence.

    ``method`` selects "direct" multiply-accumulate or "fft" (overlap-based);
    "auto" switches to FFT for large products. Both agree to within 1e-9
    relative to the output peak.
    """
    taps = np.asarray(taps, dtype=np.float64)
    if taps.ndim != 1 or taps.size == 0:
        raise ValueError("taps must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(taps)):
        raise ValueError("taps must be finite")
    if method == "auto":
        method = "fft" if w.samples.size * taps.size > 1_000_000 else "direct"
    if method == "direct":
        out = np.convolve(w.samples, taps, mode="full")
    elif method == "fft":
        out = _sig.fftconvolve(w.samples, taps, mode="full")
    else:
        raise ValueError(f"unknown convolution method {method!r}")
    return Waveform(out, w.sample_rate)
