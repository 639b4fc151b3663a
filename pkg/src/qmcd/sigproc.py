"""Detector time series: synthesis, lock-in demodulation, spectrum-analyzer emulation.

All signals are kept in optical-watt-equivalent units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal as sps

from .optics import TrainConfig, detector_power
from .quantum_noise import (
    DEFAULT_WAVELENGTH,
    PhotocurrentStats,
    photon_energy,
    sample_fluctuations,
)

#: minimum sample rate in units of the PEM frequency
MIN_OVERSAMPLING = 20
#: minimum record length in modulation periods
MIN_PERIODS = 10
#: half width of the RBW filter support, in units of rbw
_RBW_SUPPORT = 4.0
_SYNTH_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class TimeSeries:
    sample_rate: float
    samples: np.ndarray
    start_time: float = 0.0

    def __post_init__(self):
        if not self.sample_rate > 0.0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self.samples)) / self.sample_rate

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __sub__(self, other: "TimeSeries") -> "TimeSeries":
        if other.sample_rate != self.sample_rate or len(other) != len(self):
            raise ValueError("time series are not aligned")
        return TimeSeries(self.sample_rate, self.samples - other.samples, self.start_time)


@dataclass(frozen=True, eq=False)
class SpectrumTrace:
    center: float
    span: float
    rbw: float
    vbw: float
    frequencies: np.ndarray
    power_db: np.ndarray
    reference: str = "dB re 1 W^2"

    def __post_init__(self):
        if not (self.rbw > 0 and self.vbw > 0):
            raise ValueError("rbw and vbw must be positive")
        f = np.asarray(self.frequencies, dtype=float)
        if len(f) > 1 and not np.all(np.diff(f) > 0):
            raise ValueError("trace frequencies must be strictly increasing")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "power_db", np.asarray(self.power_db, dtype=float))

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.frequencies.tolist(), self.power_db.tolist()))

    @property
    def power_linear(self) -> np.ndarray:
        return 10.0 ** (self.power_db / 10.0)

    def relative_to(self, level: float, reference: str) -> "SpectrumTrace":
        """Re-express the trace in dB relative to a linear power ``level``."""
        with np.errstate(divide="ignore"):
            shift = 10.0 * np.log10(level)
        return SpectrumTrace(self.center, self.span, self.rbw, self.vbw,
                             self.frequencies, self.power_db - shift, reference)


@dataclass(frozen=True)
class HarmonicResult:
    harmonic_order: int
    amplitude: float
    phase: float
    integration_time: float

    @property
    def in_phase(self) -> float:
        """Coefficient of ``sin(n w t)``."""
        return self.amplitude * math.cos(self.phase)

    @property
    def quadrature(self) -> float:
        """Coefficient of ``cos(n w t)``."""
        return self.amplitude * math.sin(self.phase)


# -- Bessel functions ---------------------------------------------------------

def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind ``J_n(x)`` for integer ``n >= 0``.

    Miller's backward recurrence normalized with ``J_0 + 2 sum J_2k = 1``.
    """
    if n < 0 or int(n) != n:
        raise ValueError("order must be a non-negative integer")
    n = int(n)
    x = float(x)
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    sign = -1.0 if (x < 0.0 and n % 2) else 1.0
    x = abs(x)
    top = max(n, int(x)) + 20 + int(math.sqrt(40.0 * max(n, x, 1.0)))
    top += top % 2
    j_next, j = 0.0, 1e-30
    norm = 0.0
    result = 0.0
    for k in range(top, 0, -1):
        j_prev = (2.0 * k / x) * j - j_next
        j_next, j = j, j_prev
        # j now holds the unnormalized J_{k-1}
        if abs(j) > 1e250:
            j *= 1e-250
            j_next *= 1e-250
            norm *= 1e-250
            result *= 1e-250
        if k - 1 == n:
            result = j
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j
    norm += j
    return sign * result / norm


def first_harmonic_amplitude(p_dc: float, eta_f: float, delta0: float = math.pi / 2) -> float:
    """``2 P_dc J1(delta0) tanh(2 eta_f)``: size of the ``sin(w t)`` term (the waveform carries it with a minus sign)."""
    return 2.0 * p_dc * bessel_j(1, delta0) * math.tanh(2.0 * eta_f)


def odd_harmonic_series(delta0: float, phase, n_terms: int):
    """``2 sum_k J_{2k+1}(delta0) sin((2k+1) phase)`` for ``k < n_terms``."""
    phase = np.asarray(phase, dtype=float)
    out = np.zeros_like(phase)
    for k in range(n_terms):
        m = 2 * k + 1
        out = out + 2.0 * bessel_j(m, delta0) * np.sin(m * phase)
    return out


def invert_first_harmonic(p_omega: float, p_dc: float, delta0: float = math.pi / 2) -> float:
    """Ellipticity from a signed first-harmonic amplitude and the DC level."""
    if not p_dc > 0.0:
        raise ValueError("p_dc must be positive")
    arg = p_omega / (2.0 * p_dc * bessel_j(1, delta0))
    if abs(arg) >= 1.0:
        raise ValueError(f"signal exceeds model range (|P_w / (2 P_dc J1)| = {abs(arg):.4g} >= 1)")
    return 0.5 * math.atanh(arg)


# -- synthesis ------------------------------------------------------------------

def synthesize(
    train: TrainConfig,
    noise: Optional[PhotocurrentStats],
    fs: float,
    duration: float,
    seed: int = 0,
    wavelength: float = DEFAULT_WAVELENGTH,
    pedestal: float = 0.0,
    workers: Optional[int] = None,
) -> tuple[TimeSeries, TimeSeries]:
    """Probe and conjugate detector series.

    ``noise`` holds photon statistics per sample at rate ``fs``; deviations
    are converted to watts with ``h nu fs``. ``pedestal`` adds independent
    white noise of that variance (W^2) to the probe channel.
    """
    f_mod = train.pem.frequency
    if fs < MIN_OVERSAMPLING * f_mod:
        raise ValueError(f"sample rate too low: need >= {MIN_OVERSAMPLING} x {f_mod:g} Hz")
    n = int(round(duration * fs))
    if n < MIN_PERIODS * fs / f_mod - 1e-9:
        raise ValueError(f"duration must cover at least {MIN_PERIODS} modulation periods")
    t = np.arange(n) / fs
    probe = np.empty(n)
    for s in range(0, n, _SYNTH_CHUNK):
        probe[s:s + _SYNTH_CHUNK] = detector_power(train, t[s:s + _SYNTH_CHUNK])
    conj = np.zeros(n)
    if noise is not None:
        scale = photon_energy(wavelength) * fs
        dp, dc = sample_fluctuations(noise, n, seed, workers=workers)
        probe += scale * dp
        conj += scale * (noise.mean_c + dc)
    if pedestal > 0.0:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xBED,)))
        probe += math.sqrt(pedestal) * rng.standard_normal(n)
    return TimeSeries(fs, probe), TimeSeries(fs, conj)


# -- lock-in ------------------------------------------------------------------

def lock_in_window(ts: TimeSeries, f_ref: float, tau: Optional[float] = None) -> slice:
    """Leading sample window spanning a whole number of reference periods."""
    if tau is None:
        tau = ts.duration
    if tau < 5.0 / f_ref - 1e-12:
        raise ValueError("tau must be at least 5 reference periods")
    periods = math.floor(tau * f_ref + 1e-9)
    n = int(round(periods * ts.sample_rate / f_ref))
    if n > len(ts):
        raise ValueError("integration window exceeds the series")
    return slice(0, n)


def lock_in(ts: TimeSeries, f_ref: float, n: int = 1, tau: Optional[float] = None) -> HarmonicResult:
    """Dual-phase boxcar demodulation at ``n * f_ref``.

    ``A sin(2 pi n f_ref t + phi)`` returns amplitude ``A`` and phase ``phi``.
    """
    if n < 1:
        raise ValueError("harmonic order must be >= 1")
    w = lock_in_window(ts, f_ref, tau)
    x = ts.samples[w]
    x = x - x.mean()
    arg = 2.0 * np.pi * n * f_ref * ts.times[w]
    m = len(x)
    xs = 2.0 / m * np.dot(x, np.sin(arg))
    yc = 2.0 / m * np.dot(x, np.cos(arg))
    return HarmonicResult(n, float(math.hypot(xs, yc)), float(math.atan2(yc, xs)), m / ts.sample_rate)


# -- spectrum analyzer ------------------------------------------------------------

def _video_filter(power: np.ndarray, vbw: float, rate: float) -> np.ndarray:
    alpha = 1.0 - math.exp(-2.0 * math.pi * vbw / rate)
    out, _ = sps.lfilter([alpha], [1.0, alpha - 1.0], power, zi=[power[0] * (1.0 - alpha)])
    return out


def spectrum(
    ts: TimeSeries,
    center: float,
    span: float,
    rbw: float,
    vbw: float,
    n_points: int = 401,
    floor_db: Optional[float] = None,
) -> SpectrumTrace:
    """Swept-analyzer emulation with an RMS detector.

    Each trace point passes the record through a Gaussian band-pass of
    equivalent noise bandwidth ``rbw`` centred on the point, detects the
    power of the complex envelope, smooths it with a single-pole video
    filter of bandwidth ``vbw`` and averages it over the record after five
    video time constants of settling. Power is in dB re 1 W^2. A tone
    ``A sin(...)`` on a trace point reads ``A^2 / 2``. White noise reads
    ``N0 * rbw``, with ``N0`` its one-sided density.
    """
    fs = ts.sample_rate
    n = len(ts)
    df = fs / n
    if not (rbw > 0 and vbw > 0 and span > 0):
        raise ValueError("invalid band: span, rbw and vbw must be positive")
    lo, hi = center - span / 2.0, center + span / 2.0
    if lo - _RBW_SUPPORT * rbw <= 0.0 or hi + _RBW_SUPPORT * rbw >= fs / 2.0:
        raise ValueError("invalid band: span and RBW skirts must fit inside (0, fs/2)")
    if rbw < span / 1e4:
        raise ValueError("invalid band: rbw must be at least span / 1e4")
    if rbw < 4.0 * df:
        raise ValueError("invalid band: record too short to resolve rbw")
    spec = np.fft.rfft(ts.samples)
    freqs = np.linspace(lo, hi, n_points)
    out = np.empty(n_points)
    half = int(math.ceil(_RBW_SUPPORT * rbw / df))
    for i, fc in enumerate(freqs):
        k0 = int(round(fc / df))
        k = np.arange(k0 - half, k0 + half + 1)
        h = np.exp(-0.5 * np.pi * ((k * df - fc) / rbw) ** 2)
        seg = spec[k] * h
        m = len(seg)
        env = np.fft.ifft(seg) * (m / n)
        power = 2.0 * np.abs(env) ** 2
        rate = m * df
        video = _video_filter(power, vbw, rate)
        settle = min(int(5.0 * rate / (2.0 * np.pi * vbw)), m // 2)
        out[i] = video[settle:].mean()
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(out)
    if floor_db is not None:
        db = np.maximum(db, floor_db)
    return SpectrumTrace(center, span, rbw, vbw, freqs, db)


def white_noise_bin_power(variance: float, sample_rate: float, rbw: float) -> float:
    """Analyzer reading for white noise of per-sample ``variance``: one-sided density times rbw."""
    return 2.0 * variance / sample_rate * rbw


def shot_noise_bin_power(mean_photons: float, sample_rate: float, rbw: float,
                         wavelength: float = DEFAULT_WAVELENGTH) -> float:
    """Analyzer reading (W^2) of coherent-light shot noise for ``mean_photons`` per sample."""
    scale = photon_energy(wavelength) * sample_rate
    return white_noise_bin_power(mean_photons * scale ** 2, sample_rate, rbw)
