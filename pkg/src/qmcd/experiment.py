"""Field sweeps, calibration routines and trace analysis."""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .optics import SampleModel, TrainConfig, detector_power
from .quantum_noise import (
    MIN_MEAN_PHOTONS,
    LossBudget,
    PhotocurrentStats,
    SqueezedSourceModel,
    apply_loss,
    lossless_stats,
    noise_floor_db,
)
from .sigproc import (
    invert_first_harmonic,
    lock_in,
    lock_in_window,
    synthesize,
)

READOUTS = ("classical", "squeezed", "noiseless")
_READOUT_ALIASES = {"classical_balanced": "classical"}


@dataclass(frozen=True)
class MaterialResponse:
    """Field dependence of the Faraday ellipticity.

    ``linear``: ``eta(B) = eta_offset + slope * B``.
    ``saturating``: ``eta(B) = eta_offset + slope * B_sat * tanh(B / B_sat)``.
    """

    kind: str = "linear"
    slope: float = 0.02
    saturation_field: float = 1.0
    theta_slope: float = 0.0
    eta_offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "saturating"):
            raise ValueError(f"unknown material kind {self.kind!r}")
        if not math.isfinite(self.slope):
            raise ValueError("slope must be finite")
        if self.kind == "saturating" and not self.saturation_field > 0:
            raise ValueError("saturation_field must be positive")

    def eta(self, b: float) -> float:
        if self.kind == "linear":
            return self.eta_offset + self.slope * b
        bs = self.saturation_field
        return self.eta_offset + self.slope * bs * math.tanh(b / bs)

    def theta(self, b: float) -> float:
        return self.theta_slope * b


@dataclass(frozen=True)
class DemodConfig:
    sample_rate: float = 1e6
    duration: float = 2e-3
    tau: Optional[float] = None


@dataclass(frozen=True)
class SweepConfig:
    fields: tuple = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
    repeats: int = 20
    readout: str = "squeezed"
    source: SqueezedSourceModel = field(default_factory=lambda: SqueezedSourceModel(gain=calibrate_gain(-5.0, 0.95)))
    losses: LossBudget = field(default_factory=LossBudget)
    train: TrainConfig = field(default_factory=lambda: TrainConfig(sample=SampleModel.from_intensity_transmission(0.8)))
    material: MaterialResponse = field(default_factory=MaterialResponse)
    demod: DemodConfig = field(default_factory=DemodConfig)
    seed: int = 0
    #: "balanced-loss", "balanced-power" or an explicit ND transmission
    conjugate_nd: Union[str, float] = "balanced-loss"
    #: classical reference power: "conjugate" (same total flux as the squeezed readout) or "probe"
    classical_reference: str = "conjugate"
    workers: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(float(b) for b in self.fields))
        object.__setattr__(self, "readout", _READOUT_ALIASES.get(self.readout, self.readout))
        if not self.fields:
            raise ValueError("fields must be non-empty")
        if 0.0 not in self.fields:
            raise ValueError("fields must include 0 for the zero-field offset")
        if self.repeats < 2:
            raise ValueError("repeats must be >= 2")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}")
        if self.classical_reference not in ("conjugate", "probe"):
            raise ValueError("classical_reference must be 'conjugate' or 'probe'")
        if isinstance(self.conjugate_nd, str):
            if self.conjugate_nd not in ("balanced-loss", "balanced-power"):
                raise ValueError("conjugate_nd must be 'balanced-loss', 'balanced-power' or a number")
        elif not 0.0 < self.conjugate_nd <= 1.0:
            raise ValueError("conjugate_nd transmission must be in (0, 1]")

    @property
    def sample_transmission(self) -> float:
        s = self.train.sample
        return s.intensity_transmission if s is not None else 1.0


@dataclass(frozen=True)
class SweepPoint:
    field: float
    mean_eta_f: float
    std_eta_f: float
    p_omega: float
    noise_floor_db: float


@dataclass(frozen=True)
class SweepResult:
    readout: str
    points: tuple
    seed: int
    config_hash: str
    zero_field_offset: float = 0.0
    error_bar: str = "sample standard deviation over repeats (ddof=1)"

    @property
    def fields(self) -> np.ndarray:
        return np.array([p.field for p in self.points])

    @property
    def mean_eta_f(self) -> np.ndarray:
        return np.array([p.mean_eta_f for p in self.points])

    @property
    def std_eta_f(self) -> np.ndarray:
        return np.array([p.std_eta_f for p in self.points])


def config_hash(cfg) -> str:
    data = asdict(cfg)
    # scheduling does not change results
    data.pop("workers", None)
    blob = json.dumps(data, sort_keys=True, default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()


# -- calibration ----------------------------------------------------------------

def calibrate_gain(target_db: float, eta: float) -> float:
    """Gain at which equal-loss transmission ``eta`` gives a ``target_db`` noise floor."""
    if target_db > 0:
        raise ValueError("target squeezing must be <= 0 dB")
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must be in (0, 1]")
    if target_db == 0:
        return 1.0
    v = 10.0 ** (target_db / 10.0)
    # the floor tends to 1 - eta as G -> infinity
    if 1.0 - eta >= v:
        raise ValueError("insufficient transmission for target squeezing")
    g = (2.0 * eta - 1.0 + v) / (2.0 * (eta - 1.0 + v))
    if abs(noise_floor_db(g, eta) - target_db) > 1e-9:
        raise RuntimeError("gain calibration failed its round-trip check")
    return g


def auto_balance_conjugate(
    losses: LossBudget,
    gain: float,
    sample_transmission: float = 1.0,
    mode: str = "loss",
) -> float:
    """Conjugate ND transmission that balances the two arms.

    ``mode="loss"`` equalizes the total transmissions of the arms (the
    equal-loss condition of the noise-floor formula). ``mode="power"``
    equalizes the mean detected powers, which requires the probe arm to be
    lossier than the conjugate arm by at least ``(G - 1) / G``.
    """
    eta_p = losses.probe_transmission * sample_transmission
    eta_c = losses.conjugate_transmission
    if mode == "loss":
        nd = eta_p / eta_c
        if nd > 1.0:
            raise ValueError(
                f"probe arm lossier than achievable balance: equal loss needs conjugate ND transmission {nd:.4g} > 1"
            )
        return nd
    if mode == "power":
        if gain <= 1.0:
            raise ValueError("no conjugate power to balance at gain 1")
        nd = eta_p * gain / ((gain - 1.0) * eta_c)
        if nd > 1.0:
            raise ValueError(
                f"probe arm lossier than achievable balance: equal power needs conjugate ND transmission {nd:.4g} > 1"
            )
        return nd
    raise ValueError(f"unknown balance mode {mode!r}")


def conjugate_nd_transmission(cfg: SweepConfig) -> float:
    if not isinstance(cfg.conjugate_nd, str):
        return float(cfg.conjugate_nd)
    mode = cfg.conjugate_nd.split("-", 1)[1]
    return auto_balance_conjugate(cfg.losses, cfg.source.gain, cfg.sample_transmission, mode)


def readout_stats(cfg: SweepConfig, readout: Optional[str] = None) -> Optional[PhotocurrentStats]:
    """Photon statistics per sample at the detectors for a readout."""
    readout = _READOUT_ALIASES.get(readout, readout) if readout else cfg.readout
    if readout == "noiseless":
        return None
    src = cfg.source
    n_seed = src.seed_photons_per_sample(cfg.demod.sample_rate)
    eta_p = cfg.losses.probe_transmission * cfg.sample_transmission
    eta_c = cfg.losses.conjugate_transmission * conjugate_nd_transmission(cfg)
    sq = apply_loss(lossless_stats(src, n_seed), eta_p, eta_c)
    if sq.mean_p < MIN_MEAN_PHOTONS:
        raise ValueError(
            f"{sq.mean_p:.3g} probe photons per sample is below the Gaussian-model threshold "
            f"of {MIN_MEAN_PHOTONS:g}; lower the sample rate or raise the power"
        )
    if readout == "squeezed":
        return sq
    ref = sq.mean_c if cfg.classical_reference == "conjugate" else sq.mean_p
    return PhotocurrentStats.coherent(sq.mean_p, ref)


def background_first_harmonic(train: TrainConfig, hwp_angle: Optional[float] = None, samples: int = 64) -> float:
    """Noiseless first-harmonic magnitude (W) of the detector power."""
    if hwp_angle is not None:
        train = replace(train, second_hwp_angle=hwp_angle)
    pem = train.pem
    t = (np.arange(samples) / samples - pem.phase / (2 * np.pi)) / pem.frequency
    p = detector_power(train, t)
    return float(2.0 * abs(np.fft.rfft(p)[1]) / samples)


def _golden_section(f, a: float, b: float, tol: float) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def minimize_background(train: TrainConfig, grid_points: int = 64, tol: float = 1e-4) -> float:
    """Second-HWP angle in ``[0, pi)`` minimizing the zero-field first harmonic.

    A coarse grid brackets the best cell and golden-section search refines
    it to ``tol`` rad. The result never scores worse than the grid minimum.
    """
    if train.background is None:
        return 0.0

    def objective(theta):
        return background_first_harmonic(train, theta % np.pi)

    grid = np.arange(grid_points) * np.pi / grid_points
    values = np.array([objective(th) for th in grid])
    if values.max() == 0.0:
        return 0.0
    j = int(np.argmin(values))
    step = np.pi / grid_points
    best = _golden_section(objective, grid[j] - step, grid[j] + step, tol)
    best %= np.pi
    if objective(best) > values[j]:
        return float(grid[j])
    return float(best)


# -- sweeps --------------------------------------------------------------------

def _unit_seed(master: int, field_index: int, repeat: int) -> int:
    # readout is left out of the key on purpose: classical and squeezed runs
    # share their random streams, which makes error-bar ratios low-variance
    ss = np.random.SeedSequence(master, spawn_key=(field_index, repeat))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def field_train(cfg: SweepConfig, b: float) -> TrainConfig:
    sample = cfg.train.sample or SampleModel()
    sample = replace(sample, eta_f=cfg.material.eta(b), theta_f=cfg.material.theta(b))
    power = cfg.source.probe_mean_power * cfg.losses.probe_transmission
    return replace(cfg.train, sample=sample, input_power=power)


def measure_ellipticity(train: TrainConfig, stats, demod: DemodConfig, seed: int, wavelength: float):
    """One synthesized acquisition -> (eta_f, signed P_omega, P_dc)."""
    pem = train.pem
    probe, conj = synthesize(train, stats, demod.sample_rate, demod.duration, seed, wavelength)
    window = lock_in_window(probe, pem.frequency, demod.tau)
    h = lock_in(probe - conj, pem.frequency, 1, demod.tau)
    p_dc = float(probe.samples[window].mean())
    # the waveform carries -2 P_dc J1 tanh(2 eta) sin(w t + phase)
    p_omega = -h.amplitude * math.cos(h.phase - pem.phase)
    return invert_first_harmonic(p_omega, p_dc, pem.peak_retardance), p_omega, p_dc


def offset_zero_field(result: SweepResult) -> SweepResult:
    """Subtract the B = 0 mean ellipticity from every point."""
    zero = next(p for p in result.points if p.field == 0.0)
    c = zero.mean_eta_f
    points = tuple(replace(p, mean_eta_f=p.mean_eta_f - c) for p in result.points)
    return replace(result, points=points, zero_field_offset=result.zero_field_offset + c)


def run_sweep(cfg: SweepConfig) -> SweepResult:
    stats = readout_stats(cfg)
    floor = stats.noise_floor_db if stats is not None else float("nan")
    trains = [field_train(cfg, b) for b in cfg.fields]
    units = [(i, r) for i in range(len(cfg.fields)) for r in range(cfg.repeats)]

    def work(unit):
        i, r = unit
        try:
            return measure_ellipticity(trains[i], stats, cfg.demod, _unit_seed(cfg.seed, i, r),
                                       cfg.source.wavelength)
        except ValueError as exc:
            raise ValueError(f"field {cfg.fields[i] * 1e3:g} mT: {exc}") from exc

    if cfg.workers and cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            out = list(pool.map(work, units))
    else:
        out = [work(u) for u in units]

    points = []
    for i, b in enumerate(cfg.fields):
        block = out[i * cfg.repeats:(i + 1) * cfg.repeats]
        etas = np.array([o[0] for o in block])
        p_omega = np.array([o[1] for o in block])
        points.append(SweepPoint(b, float(etas.mean()), float(etas.std(ddof=1)), float(p_omega.mean()), floor))
    raw = SweepResult(cfg.readout, tuple(points), cfg.seed, config_hash(cfg))
    return offset_zero_field(raw)


def run_comparison(cfg: SweepConfig, readouts: Sequence[str] = ("classical", "squeezed")) -> list[SweepResult]:
    return [run_sweep(replace(cfg, readout=r)) for r in readouts]


def error_bar_ratio(classical: SweepResult, squeezed: SweepResult) -> float:
    """Mean over field points of std_squeezed / std_classical."""
    return float(np.mean(squeezed.std_eta_f / classical.std_eta_f))


# -- trace analysis -------------------------------------------------------------

@dataclass(frozen=True)
class TraceReport:
    squeezing_db: float
    band: tuple
    n_points: int
    peak_db: float
    peak_frequency: float
    modulation_frequency: float
    eta_f: Optional[float] = None
    p_omega: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)

    def text(self) -> str:
        lines = [
            f"squeezing: {self.squeezing_db:.2f} dB relative to SNL "
            f"({self.band[0]:g}-{self.band[1]:g} Hz, {self.n_points} points)",
            f"peak at {self.peak_frequency:g} Hz: {self.peak_db:.2f} dB",
        ]
        if self.eta_f is not None:
            lines.append(f"sideband amplitude: {self.p_omega:.6g} W -> |eta_F| = {self.eta_f:.6g}")
        return "\n".join(lines)


def _load_trace(trace):
    from .csvio import read_trace_csv

    if isinstance(trace, tuple):
        return np.asarray(trace[0], float), np.asarray(trace[1], float)
    if hasattr(trace, "frequencies"):
        return trace.frequencies, trace.power_db
    f, p, _ = read_trace_csv(trace)
    return f, p


def _mean_db(db: np.ndarray) -> float:
    return float(10.0 * np.log10(np.mean(10.0 ** (db / 10.0))))


def analyze_trace(
    trace,
    snl_reference,
    band: Optional[tuple] = None,
    modulation_frequency: float = 50e3,
    guard: float = 10e3,
    p_dc: Optional[float] = None,
    reference_power: Optional[float] = None,
    delta0: float = math.pi / 2,
) -> TraceReport:
    """Squeezing, sideband peak and implied ellipticity from an analyzer trace.

    ``trace`` and ``snl_reference`` are CSV paths, ``SpectrumTrace`` objects
    or ``(freqs, dB)`` tuples; ``snl_reference`` may also be a scalar dB
    level. Points within ``guard`` of the modulation frequency are left out
    of the noise band. The ellipticity needs ``p_dc`` (W) and
    ``reference_power``, the linear power (W^2) that 0 dB on the trace
    stands for.
    """
    f, db = _load_trace(trace)
    if isinstance(snl_reference, (int, float)):
        ref_f, ref_db = None, float(snl_reference)
        lo, hi = f[0], f[-1]
    else:
        ref_f, ref_db = _load_trace(snl_reference)
        lo, hi = max(f[0], ref_f[0]), min(f[-1], ref_f[-1])
        if lo > hi:
            raise ValueError("disjoint frequency ranges between trace and SNL reference")
    if band is not None:
        lo, hi = max(lo, band[0]), min(hi, band[1])
    sel = (f >= lo) & (f <= hi) & (np.abs(f - modulation_frequency) > guard)
    if not sel.any():
        raise ValueError("no trace points in the analysis band")
    level = _mean_db(db[sel])
    if ref_f is None:
        ref_level = ref_db
    else:
        ref_level = _mean_db(np.interp(f[sel], ref_f, ref_db))

    near = np.abs(f - modulation_frequency) <= guard
    if not near.any():
        near = np.ones_like(f, dtype=bool)
    k = np.flatnonzero(near)[np.argmax(db[near])]
    report = dict(
        squeezing_db=level - ref_level,
        band=(float(lo), float(hi)),
        n_points=int(sel.sum()),
        peak_db=float(db[k]),
        peak_frequency=float(f[k]),
        modulation_frequency=modulation_frequency,
    )
    if p_dc is not None and reference_power is not None:
        signal = max(10.0 ** (db[k] / 10.0) - 10.0 ** (level / 10.0), 0.0) * reference_power
        p_omega = math.sqrt(2.0 * signal)
        report["p_omega"] = p_omega
        report["eta_f"] = invert_first_harmonic(p_omega, p_dc, delta0)
    return TraceReport(**report)


__all__ = [
    "MaterialResponse", "DemodConfig", "SweepConfig", "SweepPoint", "SweepResult",
    "calibrate_gain", "auto_balance_conjugate", "readout_stats", "run_sweep", "run_comparison",
    "offset_zero_field", "minimize_background", "background_first_harmonic", "analyze_trace",
    "TraceReport", "error_bar_ratio",
]
