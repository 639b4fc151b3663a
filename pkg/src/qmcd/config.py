"""Experiment configuration files (YAML) with key-path validation."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .experiment import DemodConfig, MaterialResponse, SweepConfig, calibrate_gain
from .optics import BackgroundModel, PemConfig, SampleModel, TrainConfig
from .quantum_noise import LossBudget, SqueezedSourceModel

DEFAULT_CONFIG_YAML = """\
# qmcd experiment configuration. Every key is optional; the values shown are
# the defaults. Angles are in degrees, everything else in SI units.

seed: 0

pem:
  frequency_hz: 50000.0        # PEM-200 class modulator, ~50 kHz
  peak_retardance_rad: 1.5707963267948966   # quarter-wave peak (pi/2)
  axis_angle_deg: 0.0
  phase_deg: 0.0

train:
  input_polarizer_deg: 45.0    # probe polarized at 45 deg to horizontal
  second_hwp_deg: 0.0

sample:
  intensity_transmission: 0.80 # TGG crystal, 20 % attenuation
  thickness_m: 5.0e-4          # 500 um (metadata)
  wavelength_m: 7.95e-7        # Rb D1 line (metadata)

background:                    # zero-field artifact; remove or zero to disable
  retardance_rad: 0.0
  axis_angle_deg: 10.0
  detector_pol_sensitivity: 0.0
  minimize: false              # tune the second HWP before sweeping

source:
  # either gain, or target_floor_db calibrated at calibration_eta
  gain: null                   # explicit FWM gain; overrides the calibration
  target_floor_db: -5.0        # squeezing measured without a sample
  calibration_eta: 0.95        # 95 % detector efficiency is the dominant loss
  probe_power_w: 1.0e-4        # 100 uW probe
  wavelength_m: 7.95e-7

losses:
  detector_efficiency: 0.95
  probe_path: {}               # label: transmission
  conjugate_path: {}
  conjugate_nd: balanced-loss  # balanced-loss | balanced-power | transmission

material:
  kind: linear                 # linear | saturating
  slope_per_T: 0.02            # d(eta_F)/dB at B = 0
  saturation_field_T: 1.0
  theta_slope_per_T: 0.0
  eta_offset: 0.0              # zero-field ellipticity of the sample

sweep:
  fields_mT: [0, 100, 200, 300, 400, 500, 600]
  repeats: 20
  readouts: [classical, squeezed]
  classical_reference: conjugate   # conjugate | probe
  workers: 1

demod:
  sample_rate_hz: 1.0e+6
  duration_s: 2.0e-3
  tau_s: null                  # null: whole record

analyzer:                      # used by simulate-trace
  center_hz: 50000.0
  span_hz: 40000.0
  rbw_hz: 3000.0
  vbw_hz: 300.0
  points: 401
  duration_s: 1.0
"""


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class AnalyzerSettings:
    center: float = 50e3
    span: float = 40e3
    rbw: float = 3000.0
    vbw: float = 300.0
    points: int = 401
    duration: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    sweep: SweepConfig
    readouts: tuple
    minimize_background: bool
    analyzer: AnalyzerSettings
    resolved: dict

    @property
    def config_hash(self) -> str:
        return resolved_hash(self.resolved)


def resolved_hash(resolved: dict) -> str:
    """Digest of the resolved config; the seed is recorded separately and workers are ignored."""
    body = {k: v for k, v in resolved.items() if k != "seed"}
    if isinstance(body.get("sweep"), dict):
        body["sweep"] = {k: v for k, v in body["sweep"].items() if k != "workers"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _defaults() -> dict:
    return yaml.safe_load(DEFAULT_CONFIG_YAML)


def _merge(defaults: dict, user: dict, path: str = "") -> dict:
    out = dict(defaults)
    for key, value in user.items():
        kp = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            raise ConfigError(kp, "unknown key")
        d = defaults[key]
        if isinstance(d, dict) and d and key not in ("probe_path", "conjugate_path"):
            if value is None:
                value = {}
            if not isinstance(value, dict):
                raise ConfigError(kp, "expected a mapping")
            out[key] = _merge(d, value, kp)
        else:
            out[key] = value
    return out


class _Reader:
    def __init__(self, data: dict, path: str):
        self.data = data
        self.path = path

    def kp(self, key):
        return f"{self.path}.{key}"

    def num(self, key, lo=None, hi=None, lo_open=False, hi_open=False, allow_none=False):
        v = self.data.get(key)
        if v is None and allow_none:
            return None
        try:
            if isinstance(v, bool):
                raise TypeError
            v = float(v)
        except (TypeError, ValueError):
            raise ConfigError(self.kp(key), f"expected a number, got {v!r}") from None
        if not math.isfinite(v):
            raise ConfigError(self.kp(key), "must be finite")
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise ConfigError(self.kp(key), f"must be {'>' if lo_open else '>='} {lo:g}")
        if hi is not None and (v > hi or (hi_open and v == hi)):
            raise ConfigError(self.kp(key), f"must be {'<' if hi_open else '<='} {hi:g}")
        # canonical value in the resolved config, so "1e6" and 1000000 hash alike
        self.data[key] = v
        return v

    def integer(self, key, lo=None, message=None):
        v = self.data.get(key)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
            raise ConfigError(self.kp(key), f"expected an integer, got {v!r}")
        v = int(v)
        if lo is not None and v < lo:
            raise ConfigError(self.kp(key), message or f"must be >= {lo}")
        self.data[key] = v
        return v

    def choice(self, key, options):
        v = self.data.get(key)
        if v not in options:
            raise ConfigError(self.kp(key), f"must be one of {', '.join(options)}; got {v!r}")
        return v

    def transmissions(self, key):
        v = self.data.get(key) or {}
        if not isinstance(v, dict):
            raise ConfigError(self.kp(key), "expected a mapping of label: transmission")
        sub = _Reader(v, self.kp(key))
        return tuple((str(label), sub.num(label, 0.0, 1.0, lo_open=True)) for label in v)


def _build(raw: dict) -> RunConfig:
    deg = math.pi / 180.0
    seed_r = _Reader(raw, "")
    seed = int(seed_r.integer("seed", 0)) if raw.get("seed") is not None else 0

    r = _Reader(raw["pem"], "pem")
    pem = PemConfig(
        axis_angle=r.num("axis_angle_deg") * deg,
        peak_retardance=r.num("peak_retardance_rad", 0.0, math.pi, lo_open=True),
        frequency=r.num("frequency_hz", 0.0, lo_open=True),
        phase=r.num("phase_deg") * deg,
    )

    r = _Reader(raw["sample"], "sample")
    sample = SampleModel.from_intensity_transmission(
        r.num("intensity_transmission", 0.0, 1.0, lo_open=True),
        thickness=r.num("thickness_m", 0.0, allow_none=True),
        wavelength=r.num("wavelength_m", 0.0, lo_open=True, allow_none=True),
    )

    r = _Reader(raw["background"], "background")
    background = BackgroundModel(
        retardance=r.num("retardance_rad", -0.2, 0.2, lo_open=True, hi_open=True),
        axis_angle=r.num("axis_angle_deg") * deg,
        detector_pol_sensitivity=r.num("detector_pol_sensitivity", 0.0, 1.0, hi_open=True),
    )
    minimize = raw["background"].get("minimize")
    if not isinstance(minimize, bool):
        raise ConfigError("background.minimize", "expected true or false")
    if background.retardance == 0.0 and background.detector_pol_sensitivity == 0.0:
        background = None

    r = _Reader(raw["train"], "train")
    train_kw = dict(
        input_polarizer_angle=r.num("input_polarizer_deg") * deg,
        second_hwp_angle=r.num("second_hwp_deg") * deg,
    )

    r = _Reader(raw["losses"], "losses")
    losses = LossBudget(
        probe_path=r.transmissions("probe_path"),
        conjugate_path=r.transmissions("conjugate_path"),
        detector_efficiency=r.num("detector_efficiency", 0.0, 1.0, lo_open=True),
    )
    nd = raw["losses"].get("conjugate_nd")
    if not (isinstance(nd, str) and nd in ("balanced-loss", "balanced-power")):
        nd = r.num("conjugate_nd", 0.0, 1.0, lo_open=True)

    r = _Reader(raw["source"], "source")
    power = r.num("probe_power_w", 0.0, lo_open=True)
    wavelength = r.num("wavelength_m", 0.0, lo_open=True)
    if raw["source"].get("gain") is not None:
        gain = r.num("gain", 1.0)
    else:
        target = r.num("target_floor_db", hi=0.0)
        eta = r.num("calibration_eta", 0.0, 1.0, lo_open=True)
        try:
            gain = calibrate_gain(target, eta)
        except ValueError as exc:
            raise ConfigError("source.target_floor_db", str(exc)) from None
    source = SqueezedSourceModel(gain=gain, probe_mean_power=power, wavelength=wavelength)

    r = _Reader(raw["material"], "material")
    material = MaterialResponse(
        kind=r.choice("kind", ("linear", "saturating")),
        slope=r.num("slope_per_T"),
        saturation_field=r.num("saturation_field_T", 0.0, lo_open=True),
        theta_slope=r.num("theta_slope_per_T"),
        eta_offset=r.num("eta_offset"),
    )

    r = _Reader(raw["demod"], "demod")
    demod = DemodConfig(
        sample_rate=r.num("sample_rate_hz", 0.0, lo_open=True),
        duration=r.num("duration_s", 0.0, lo_open=True),
        tau=r.num("tau_s", 0.0, lo_open=True, allow_none=True),
    )
    if demod.sample_rate < 20 * pem.frequency:
        raise ConfigError("demod.sample_rate_hz", "sample rate too low: need >= 20 x PEM frequency")
    if demod.duration * pem.frequency < 10 - 1e-9:
        raise ConfigError("demod.duration_s", "must cover at least 10 modulation periods")
    if demod.tau is not None and demod.tau > demod.duration:
        raise ConfigError("demod.tau_s", "longer than duration_s")
    if demod.tau is not None and demod.tau * pem.frequency < 5 - 1e-9:
        raise ConfigError("demod.tau_s", "must cover at least 5 modulation periods")

    r = _Reader(raw["sweep"], "sweep")
    fields = raw["sweep"].get("fields_mT")
    if not isinstance(fields, list) or not fields:
        raise ConfigError("sweep.fields_mT", "expected a non-empty list")
    fr = _Reader({str(i): v for i, v in enumerate(fields)}, "sweep.fields_mT")
    fields_t = tuple(fr.num(str(i)) * 1e-3 for i in range(len(fields)))
    if 0.0 not in fields_t:
        raise ConfigError("sweep.fields_mT", "must include 0 (zero-field offset)")
    repeats = r.integer("repeats", 2, "repeats must be ≥ 2")
    readouts = raw["sweep"].get("readouts")
    if isinstance(readouts, str):
        readouts = [readouts]
    if not isinstance(readouts, list) or not readouts:
        raise ConfigError("sweep.readouts", "expected a non-empty list")
    rr = _Reader({str(i): v for i, v in enumerate(readouts)}, "sweep.readouts")
    readouts = tuple(rr.choice(str(i), ("classical", "squeezed", "noiseless", "classical_balanced"))
                     for i in range(len(readouts)))
    readouts = tuple("classical" if x == "classical_balanced" else x for x in readouts)
    classical_reference = r.choice("classical_reference", ("conjugate", "probe"))
    workers = r.integer("workers", 1)

    r = _Reader(raw["analyzer"], "analyzer")
    analyzer = AnalyzerSettings(
        center=r.num("center_hz", 0.0, lo_open=True),
        span=r.num("span_hz", 0.0, lo_open=True),
        rbw=r.num("rbw_hz", 0.0, lo_open=True),
        vbw=r.num("vbw_hz", 0.0, lo_open=True),
        points=r.integer("points", 2),
        duration=r.num("duration_s", 0.0, lo_open=True),
    )

    train = TrainConfig(pem=pem, sample=sample, background=background,
                        input_power=power * losses.probe_transmission, **train_kw)
    try:
        sweep = SweepConfig(
            fields=fields_t, repeats=repeats, readout=readouts[0], source=source, losses=losses,
            train=train, material=material, demod=demod, seed=seed, conjugate_nd=nd,
            classical_reference=classical_reference, workers=workers,
        )
    except ValueError as exc:
        raise ConfigError("sweep", str(exc)) from None
    return RunConfig(sweep, readouts, minimize, analyzer, raw)


def load_config(source: Any = None) -> RunConfig:
    """Load a config from a YAML path, a YAML string in a dict, or ``None`` for defaults."""
    if source is None:
        user = {}
    elif isinstance(source, dict):
        user = source
    else:
        text = Path(source).read_text(encoding="utf-8")
        try:
            user = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(str(source), f"YAML parse error: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError(str(source), "top level must be a mapping")
    raw = _merge(_defaults(), user)
    return _build(raw)
