"""Two-mode intensity-difference squeezing: photon statistics, loss, sampling.

The seeded four-wave-mixing source is reduced to its gain ``G``. With ``n``
seed photons per sample interval the lossless probe/conjugate statistics are
those of a phase-insensitive amplifier::

    <p> = G n             Var p = G (2G - 1) n
    <c> = (G - 1) n       Var c = (G - 1)(2G - 1) n
    Cov(p, c) = 2 G (G - 1) n

so ``Var(p - c) / (<p> + <c>) = 1 / (2G - 1)``. Each arm's loss is a beam
splitter of transmission ``eta``. With equal loss on both arms the
normalized difference variance is ``1 - 2 eta (G - 1) / (2G - 1)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import constants

#: Gaussian photocount model is only used above this many photons per sample
MIN_MEAN_PHOTONS = 100.0
DEFAULT_WAVELENGTH = 795e-9
DEFAULT_CHUNK = 1 << 16


def photon_energy(wavelength: float) -> float:
    return constants.h * constants.c / wavelength


@dataclass(frozen=True)
class SqueezedSourceModel:
    gain: float
    probe_mean_power: float = 100e-6
    wavelength: float = DEFAULT_WAVELENGTH

    def __post_init__(self):
        if not self.gain >= 1.0:
            raise ValueError("gain must be >= 1")
        if not self.probe_mean_power > 0.0:
            raise ValueError("probe_mean_power must be positive")
        if not self.wavelength > 0.0:
            raise ValueError("wavelength must be positive")

    @property
    def conjugate_mean_power(self) -> float:
        return self.probe_mean_power * (self.gain - 1.0) / self.gain

    def seed_photons_per_sample(self, sample_rate: float) -> float:
        """Seed photons per sample interval that reproduce ``probe_mean_power``."""
        return self.probe_mean_power / (self.gain * photon_energy(self.wavelength) * sample_rate)


def _check_transmissions(segments, arm):
    out = []
    for label, eta in segments:
        eta = float(eta)
        if not 0.0 < eta <= 1.0:
            raise ValueError(f"{arm} transmission {label!r}={eta} outside (0, 1]")
        out.append((str(label), eta))
    return tuple(out)


@dataclass(frozen=True)
class LossBudget:
    """Per-arm transmissions from the vapor cell to the detector."""

    probe_path: tuple = ()
    conjugate_path: tuple = ()
    detector_efficiency: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "probe_path", _check_transmissions(self.probe_path, "probe"))
        object.__setattr__(self, "conjugate_path", _check_transmissions(self.conjugate_path, "conjugate"))
        if not 0.0 < self.detector_efficiency <= 1.0:
            raise ValueError("detector_efficiency must be in (0, 1]")

    @property
    def probe_transmission(self) -> float:
        return math.prod(eta for _, eta in self.probe_path) * self.detector_efficiency

    @property
    def conjugate_transmission(self) -> float:
        return math.prod(eta for _, eta in self.conjugate_path) * self.detector_efficiency

    def with_probe(self, label: str, eta: float) -> "LossBudget":
        return LossBudget(self.probe_path + ((label, eta),), self.conjugate_path, self.detector_efficiency)

    def with_conjugate(self, label: str, eta: float) -> "LossBudget":
        return LossBudget(self.probe_path, self.conjugate_path + ((label, eta),), self.detector_efficiency)


@dataclass(frozen=True)
class PhotocurrentStats:
    """Means and 2x2 covariance of probe/conjugate photon counts per sample."""

    mean_p: float
    mean_c: float
    var_p: float
    var_c: float
    cov_pc: float

    @classmethod
    def coherent(cls, mean_p: float, mean_c: float = 0.0) -> "PhotocurrentStats":
        """Two independent Poissonian beams (the shot-noise reference)."""
        return cls(mean_p, mean_c, mean_p, mean_c, 0.0)

    @property
    def difference_variance(self) -> float:
        return self.var_p + self.var_c - 2.0 * self.cov_pc

    @property
    def normalized_difference_variance(self) -> float:
        """``Var(p - c)`` in units of the shot noise of the total detected flux."""
        return self.difference_variance / (self.mean_p + self.mean_c)

    @property
    def noise_floor_db(self) -> float:
        return 10.0 * math.log10(self.normalized_difference_variance)

    @property
    def fano_p(self) -> float:
        return self.var_p / self.mean_p

    @property
    def fano_c(self) -> float:
        return self.var_c / self.mean_c if self.mean_c > 0 else 1.0

    def is_physical(self, rtol: float = 1e-12) -> bool:
        if self.var_p < 0.0 or self.var_c < 0.0:
            return False
        return self.cov_pc ** 2 <= self.var_p * self.var_c * (1.0 + rtol) + 1e-300

    def scaled(self, factor: float) -> "PhotocurrentStats":
        """Same Fano factors and correlation at ``factor`` times the flux."""
        return PhotocurrentStats(
            self.mean_p * factor, self.mean_c * factor,
            self.var_p * factor, self.var_c * factor, self.cov_pc * factor,
        )


def lossless_stats(src: SqueezedSourceModel, n_in: float) -> PhotocurrentStats:
    """Photon statistics at the cell output for ``n_in`` seed photons per sample."""
    if not n_in > 0.0:
        raise ValueError("n_in must be positive")
    g = src.gain
    return PhotocurrentStats(
        mean_p=g * n_in,
        mean_c=(g - 1.0) * n_in,
        var_p=g * (2.0 * g - 1.0) * n_in,
        var_c=(g - 1.0) * (2.0 * g - 1.0) * n_in,
        cov_pc=2.0 * g * (g - 1.0) * n_in,
    )


def apply_loss(stats: PhotocurrentStats, eta_p: float, eta_c: float) -> PhotocurrentStats:
    """Beam-splitter loss on each arm; Fano factor ``F -> eta F + 1 - eta``."""
    for name, eta in (("eta_p", eta_p), ("eta_c", eta_c)):
        if not 0.0 < eta <= 1.0:
            raise ValueError(f"{name}={eta} outside (0, 1]")
    return PhotocurrentStats(
        mean_p=eta_p * stats.mean_p,
        mean_c=eta_c * stats.mean_c,
        var_p=eta_p ** 2 * (stats.var_p - stats.mean_p) + eta_p * stats.mean_p,
        var_c=eta_c ** 2 * (stats.var_c - stats.mean_c) + eta_c * stats.mean_c,
        cov_pc=eta_p * eta_c * stats.cov_pc,
    )


def noise_floor_linear(gain: float, eta: float) -> float:
    """Difference-noise variance relative to the shot-noise limit for equal arm loss."""
    if not gain >= 1.0:
        raise ValueError("gain must be >= 1")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must be in [0, 1]")
    return 1.0 - 2.0 * eta * (gain - 1.0) / (2.0 * gain - 1.0)


def noise_floor_db(gain: float, eta: float) -> float:
    return 10.0 * math.log10(noise_floor_linear(gain, eta))


def _difference_first_factors(stats: PhotocurrentStats):
    """Factor the covariance in the (difference, sum) basis.

    The difference channel depends on the first normal variate only, so two
    readouts drawn with the same seed have difference noise that differs
    by a constant factor.
    """
    if not stats.is_physical():
        raise ValueError("unphysical statistics")
    var_u = max(stats.difference_variance, 0.0)
    var_v = stats.var_p + stats.var_c + 2.0 * stats.cov_pc
    cov_uv = stats.var_p - stats.var_c
    a = math.sqrt(var_u)
    b = cov_uv / a if a > 0.0 else 0.0
    d = math.sqrt(max(var_v - b * b, 0.0))
    return a, b, d


def _fill_chunk(out_p, out_c, start, stop, factors, seed, index):
    a, b, d = factors
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    z = rng.standard_normal((2, stop - start))
    u = a * z[0]
    v = b * z[0] + d * z[1]
    out_p[start:stop] = 0.5 * (v + u)
    out_c[start:stop] = 0.5 * (v - u)


def sample_fluctuations(
    stats: PhotocurrentStats,
    n_samples: int,
    seed: int,
    chunk_size: int = DEFAULT_CHUNK,
    workers: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Zero-mean jointly Gaussian probe/conjugate deviations (photons per sample).

    Chunk ``k`` draws from ``SeedSequence(seed, spawn_key=(k,))`` so the output
    is bit-identical for a given ``(seed, chunk_size)`` however the chunks
    are scheduled.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    factors = _difference_first_factors(stats)
    p = np.empty(n_samples)
    c = np.empty(n_samples)
    bounds = [(k, s, min(s + chunk_size, n_samples)) for k, s in enumerate(range(0, n_samples, chunk_size))]
    if workers and workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_fill_chunk, p, c, s, e, factors, seed, k) for k, s, e in bounds]
            for f in futures:
                f.result()
    else:
        for k, s, e in bounds:
            _fill_chunk(p, c, s, e, factors, seed, k)
    return p, c


def estimate_noise_floor_db(probe_dev: np.ndarray, conj_dev: np.ndarray, stats: PhotocurrentStats) -> float:
    """Monte Carlo difference variance relative to the shot noise of ``stats``' mean flux."""
    diff = probe_dev - conj_dev
    return 10.0 * math.log10(np.var(diff) / (stats.mean_p + stats.mean_c))
