"""Synthetic recording-device oracle: known smooth gain curves applied to generated sources, with aligned or unaligned dataset construction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import dsp
from .correction import RecordingSet
from .dsp import DB_PER_NAT, Waveform

SOURCES = ("white", "pink", "speechlike-modulated")

RESPONSE_BOUND_DB = 40.0
# Largest natural-log gain step between adjacent bins a response may have.
MAX_LOG_STEP = 0.1


def _validate_response(gains: np.ndarray, what: str) -> np.ndarray:
    gains = np.asarray(gains, dtype=np.float64)
    if gains.ndim != 1 or gains.size < 2:
        raise ValueError(f"{what} gains must be a 1-D vector of at least 2 bins")
    bound = 10.0 ** (RESPONSE_BOUND_DB / 20.0)
    if not np.all(np.isfinite(gains)) or np.any(gains <= 0):
        raise ValueError(f"{what} gains must be finite and positive")
    if np.any(gains > bound * (1 + 1e-9)) or np.any(gains < (1 - 1e-9) / bound):
        raise ValueError(f"{what} gains must stay within +/-{RESPONSE_BOUND_DB} dB")
    steps = np.abs(np.diff(np.log(gains)))
    if steps.size and steps.max() > MAX_LOG_STEP * (1 + 1e-9):
        raise ValueError(
            f"{what} is not smooth: adjacent-bin log-gain step {steps.max():.4f} "
            f"exceeds {MAX_LOG_STEP}")
    return gains


@dataclass(frozen=True)
class DeviceResponse:
    """Ground-truth per-bin linear gain curve of a simulated device."""

    gains: np.ndarray
    device_id: str
    n_fft: int
    sample_rate: int

    def __post_init__(self):
        gains = _validate_response(self.gains, f"device response {self.device_id!r}")
        if gains.size != self.n_fft // 2 + 1:
            raise ValueError(f"device response needs n_fft//2+1 = {self.n_fft // 2 + 1} bins")
        object.__setattr__(self, "gains", gains)


@dataclass(frozen=True)
class EnvironmentResponse:
    """Ground-truth per-bin gain curve the environment imprints on a signal."""

    gains: np.ndarray
    scene_id: str
    n_fft: int
    sample_rate: int

    def __post_init__(self):
        gains = _validate_response(self.gains, f"environment response {self.scene_id!r}")
        if gains.size != self.n_fft // 2 + 1:
            raise ValueError(f"environment response needs n_fft//2+1 = {self.n_fft // 2 + 1} bins")
        object.__setattr__(self, "gains", gains)


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines a synthetic dataset; the seed fixes all outputs."""

    seed: int
    num_recordings: int
    duration: float
    source: str
    aligned: bool
    devices: tuple
    environments: tuple = ()
    sample_rate: int = 44100
    n_fft: int = 2048
    hop: int = 512

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        object.__setattr__(self, "environments", tuple(self.environments))
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.num_recordings < 1:
            raise ValueError("num_recordings must be >= 1")
        if self.duration * self.sample_rate < self.n_fft:
            raise ValueError(
                f"duration {self.duration}s at {self.sample_rate} Hz is shorter "
                f"than one analysis frame (n_fft={self.n_fft})")
        if not self.devices:
            raise ValueError("at least one device response is required")
        ids = [d.device_id for d in self.devices]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate device ids: {ids}")
        for resp in list(self.devices) + list(self.environments):
            if resp.n_fft != self.n_fft or resp.sample_rate != self.sample_rate:
                raise ValueError("all responses must match the dataset n_fft/sample_rate")


@dataclass(frozen=True)
class SimRecording:
    recording_id: str
    device_id: str
    group_id: Optional[str]
    waveform: Waveform


@dataclass(frozen=True)
class SimDataset:
    """A generated dataset: waveforms, their re-analyzed spectrograms, and truth."""

    recordings: RecordingSet
    waveforms: tuple
    devices: tuple
    environments: tuple

    def device_truth(self) -> dict:
        return {d.device_id: d for d in self.devices}


def _smooth_log_gains(rng: np.random.Generator, max_db: float, n_bins: int) -> np.ndarray:
    """Random smooth log-gain curve: a few low-order cosine terms, rescaled
    so the extreme value is exactly max_db, with the adjacent-bin step kept
    under MAX_LOG_STEP."""
    max_nat = max_db / DB_PER_NAT
    budget = 0.9 * MAX_LOG_STEP
    order_cap = min(6.0, budget * (n_bins - 1) / (np.pi * max_nat))
    x = np.linspace(0.0, 1.0, n_bins)
    for _ in range(256):
        k = int(rng.integers(3, 9))
        orders = rng.uniform(0.0, order_cap, size=k)
        amps = rng.standard_normal(k)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=k)
        curve = np.zeros(n_bins)
        for order, amp, phase in zip(orders, amps, phases):
            curve += amp * np.cos(np.pi * order * x + phase)
        peak = np.max(np.abs(curve))
        if peak < 1e-12:
            continue
        log_gain = curve * (max_nat / peak)
        if np.max(np.abs(np.diff(log_gain))) <= MAX_LOG_STEP - 1e-6:
            return log_gain
    # Degenerate geometry (tiny n_bins at a large max_db): fall back to a
    # single gentle term, which always satisfies the step bound.
    curve = np.cos(np.pi * min(order_cap, 0.5) * x)
    return curve * (max_nat / np.max(np.abs(curve)))


def make_smooth_response(seed: int, max_db: float, n_fft: int, sample_rate: int,
                         device_id: str = "dev") -> DeviceResponse:
    """Deterministic random smooth device response with peak gain max_db."""
    if not 0 < max_db <= RESPONSE_BOUND_DB:
        raise ValueError(f"max_db must lie in (0, {RESPONSE_BOUND_DB}], got {max_db}")
    rng = np.random.default_rng(seed)
    gains = np.exp(_smooth_log_gains(rng, max_db, n_fft // 2 + 1))
    return DeviceResponse(gains, device_id, n_fft, sample_rate)


def make_smooth_environment(seed: int, max_db: float, n_fft: int, sample_rate: int,
                            scene_id: str = "env") -> EnvironmentResponse:
    """Deterministic random smooth environment response with peak gain max_db."""
    if not 0 < max_db <= RESPONSE_BOUND_DB:
        raise ValueError(f"max_db must lie in (0, {RESPONSE_BOUND_DB}], got {max_db}")
    rng = np.random.default_rng(seed)
    gains = np.exp(_smooth_log_gains(rng, max_db, n_fft // 2 + 1))
    return EnvironmentResponse(gains, scene_id, n_fft, sample_rate)


def flat_response(device_id: str, n_fft: int, sample_rate: int) -> DeviceResponse:
    """Identity device: unit gain in every bin."""
    return DeviceResponse(np.ones(n_fft // 2 + 1), device_id, n_fft, sample_rate)


def flat_environment(scene_id: str, n_fft: int, sample_rate: int) -> EnvironmentResponse:
    """Identity environment: unit gain in every bin."""
    return EnvironmentResponse(np.ones(n_fft // 2 + 1), scene_id, n_fft, sample_rate)


def record(clean: Waveform, env: Optional[EnvironmentResponse],
           dev: DeviceResponse, hop: Optional[int] = None) -> Waveform:
    """Pass a clean waveform through environment and device gain curves.

    The gains multiply STFT magnitudes with phases kept (zero-phase
    distortion), so the true per-bin ratios are exactly known. The output is
    zero-padded back to the input length; samples within n_fft of either end
    are edge-affected.
    """
    if dev.sample_rate != clean.sample_rate:
        raise ValueError(f"config mismatch: waveform at {clean.sample_rate} Hz, "
                         f"device response at {dev.sample_rate} Hz")
    if env is not None and (env.n_fft != dev.n_fft or env.sample_rate != dev.sample_rate):
        raise ValueError("config mismatch between environment and device responses")
    if hop is None:
        hop = dev.n_fft // 4
    gains = dev.gains if env is None else dev.gains * env.gains
    spec = dsp.stft(clean, dev.n_fft, hop)
    shaped = dsp.ComplexSpectrogram(spec.bins * gains, spec.n_fft, spec.hop,
                                    spec.sample_rate, spec.window_name)
    out = dsp.istft(shaped).samples
    if out.size < len(clean):
        out = np.concatenate([out, np.zeros(len(clean) - out.size)])
    return Waveform(out, clean.sample_rate)


def _make_source(rng: np.random.Generator, kind: str, num_samples: int,
                 sample_rate: int) -> Waveform:
    if kind == "white":
        samples = rng.standard_normal(num_samples)
    elif kind == "pink":
        white = np.fft.rfft(rng.standard_normal(num_samples))
        freqs = np.fft.rfftfreq(num_samples, d=1.0 / sample_rate)
        freqs[0] = freqs[1]
        samples = np.fft.irfft(white / np.sqrt(freqs), n=num_samples)
    elif kind == "speechlike-modulated":
        # White noise under a slow (~4 Hz) log-amplitude envelope.
        samples = rng.standard_normal(num_samples)
        knots = max(2, int(round(4.0 * num_samples / sample_rate)) + 1)
        env = np.interp(np.linspace(0.0, 1.0, num_samples),
                        np.linspace(0.0, 1.0, knots),
                        rng.standard_normal(knots))
        samples = samples * np.exp(0.5 * env)
    else:
        raise ValueError(f"source must be one of {SOURCES}, got {kind!r}")
    rms = np.sqrt(np.mean(samples ** 2))
    return Waveform(samples * (0.1 / rms), sample_rate)


def generate_dataset(cfg: SimConfig) -> SimDataset:
    """Produce a deterministic dataset of recordings with known ground truth.

    Aligned mode records every clean source through all devices (same signal
    and environment per alignment group). Unaligned mode draws a fresh,
    independent source for each device/recording from the same generator.
    Per-recording seeds derive from (seed, indices), so generation order is
    immaterial.
    """
    num_samples = int(round(cfg.duration * cfg.sample_rate))
    items = []
    waves = []
    groups: dict = {}

    def env_for(index: int) -> Optional[EnvironmentResponse]:
        if not cfg.environments:
            return None
        return cfg.environments[index % len(cfg.environments)]

    def analyze(wave: Waveform):
        return dsp.amplitude(dsp.stft(wave, cfg.n_fft, cfg.hop))

    if cfg.aligned:
        for i in range(cfg.num_recordings):
            rng = np.random.default_rng([cfg.seed, i])
            clean = _make_source(rng, cfg.source, num_samples, cfg.sample_rate)
            env = env_for(i)
            group = f"g{i:04d}"
            for dev in cfg.devices:
                wave = record(clean, env, dev, hop=cfg.hop)
                rid = f"{group}_{dev.device_id}"
                items.append((rid, dev.device_id, analyze(wave)))
                waves.append(SimRecording(rid, dev.device_id, group, wave))
                groups[rid] = group
        recordings = RecordingSet(items, groups)
    else:
        for d_idx, dev in enumerate(cfg.devices):
            for i in range(cfg.num_recordings):
                rng = np.random.default_rng([cfg.seed, d_idx, i])
                clean = _make_source(rng, cfg.source, num_samples, cfg.sample_rate)
                wave = record(clean, env_for(i), dev, hop=cfg.hop)
                rid = f"{dev.device_id}_{i:04d}"
                items.append((rid, dev.device_id, analyze(wave)))
                waves.append(SimRecording(rid, dev.device_id, None, wave))
        recordings = RecordingSet(items, None)

    return SimDataset(recordings, tuple(waves), cfg.devices, cfg.environments)
