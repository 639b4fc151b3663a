"""Optical element catalog and time-domain detector power of the MCD train.

Train order (light travels left to right)::

    source -> input polarizer -> PEM -> sample -> background birefringence
           -> second half-wave plate -> photodiode

The photodiode weights the horizontal and vertical intensities by
``1 + eps`` and ``1 - eps`` (``eps`` is the detector polarization
sensitivity), so ``eps = 0`` returns the total intensity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .polarization import (
    PolarizationOperator,
    circular_diattenuator_matrix,
    polarizer_matrix,
    retarder_matrix,
)

#: largest background retardance the small-birefringence model accepts (rad)
MAX_BACKGROUND_RETARDANCE = 0.2


@dataclass(frozen=True)
class Polarizer:
    angle: float = 0.0

    def jones(self, t=0.0) -> np.ndarray:
        return polarizer_matrix(self.angle)


@dataclass(frozen=True)
class Waveplate:
    retardance: float
    angle: float = 0.0

    def jones(self, t=0.0) -> np.ndarray:
        return retarder_matrix(self.retardance, self.angle)


def half_wave_plate(angle: float) -> Waveplate:
    return Waveplate(np.pi, angle)


def quarter_wave_plate(angle: float) -> Waveplate:
    return Waveplate(np.pi / 2, angle)


@dataclass(frozen=True)
class NeutralDensity:
    """Polarization-independent intensity attenuator."""

    transmission: float

    def __post_init__(self):
        if not 0.0 < self.transmission <= 1.0:
            raise ValueError("transmission must be in (0, 1]")

    def jones(self, t=0.0) -> np.ndarray:
        return np.sqrt(self.transmission) * np.eye(2, dtype=complex)


@dataclass(frozen=True)
class PemConfig:
    """Photoelastic modulator: retardance ``peak_retardance * sin(2 pi f t + phase)``."""

    axis_angle: float = 0.0
    peak_retardance: float = np.pi / 2
    frequency: float = 50e3
    phase: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.peak_retardance <= np.pi:
            raise ValueError("peak_retardance must be in (0, pi]")
        if not self.frequency > 0.0:
            raise ValueError("PEM frequency must be positive")

    @property
    def omega(self) -> float:
        return 2.0 * np.pi * self.frequency

    @property
    def period(self) -> float:
        return 1.0 / self.frequency

    def retardance(self, t):
        return self.peak_retardance * np.sin(self.omega * np.asarray(t, dtype=float) + self.phase)

    def jones(self, t=0.0) -> np.ndarray:
        return retarder_matrix(self.retardance(t), self.axis_angle)


@dataclass(frozen=True)
class SampleModel:
    """Circular dichroic retarder.

    Circular amplitude transmissions are ``t_L = t_mean * exp(+eta_f)`` and
    ``t_R = t_mean * exp(-eta_f)``; circular phases are ``phi_R = +theta_f``
    and ``phi_L = -theta_f``. ``thickness`` and ``wavelength`` are metadata.
    """

    theta_f: float = 0.0
    eta_f: float = 0.0
    mean_amp_transmission: float = 1.0
    thickness: Optional[float] = None
    wavelength: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.mean_amp_transmission <= 1.0:
            raise ValueError("mean_amp_transmission must be in (0, 1]")
        if max(self.t_r, self.t_l) > 1.0 + 1e-12:
            raise ValueError(
                f"circular transmission exceeds 1 (t_R={self.t_r:.6g}, t_L={self.t_l:.6g}); "
                "lower mean_amp_transmission or |eta_f|"
            )

    @classmethod
    def from_optical_constants(cls, n_r, n_l, k_r, k_l, thickness, wavelength) -> "SampleModel":
        """Build from circular refractive indices and extinction coefficients."""
        scale = np.pi * thickness / wavelength
        return cls(
            theta_f=scale * (n_r - n_l),
            eta_f=scale * (k_r - k_l),
            mean_amp_transmission=float(np.exp(-scale * (k_r + k_l))),
            thickness=thickness,
            wavelength=wavelength,
        )

    @classmethod
    def from_intensity_transmission(cls, transmission: float, **kw) -> "SampleModel":
        return cls(mean_amp_transmission=float(np.sqrt(transmission)), **kw)

    @property
    def t_r(self) -> float:
        return self.mean_amp_transmission * np.exp(-self.eta_f)

    @property
    def t_l(self) -> float:
        return self.mean_amp_transmission * np.exp(self.eta_f)

    @property
    def phi_r(self) -> float:
        return self.theta_f

    @property
    def phi_l(self) -> float:
        return -self.theta_f

    @property
    def intensity_transmission(self) -> float:
        return self.mean_amp_transmission ** 2

    def jones(self, t=0.0) -> np.ndarray:
        return circular_diattenuator_matrix(self.t_r, self.phi_r, self.t_l, self.phi_l)


@dataclass(frozen=True)
class BackgroundModel:
    """Residual linear birefringence of the optics plus photodiode polarization sensitivity."""

    retardance: float = 0.0
    axis_angle: float = 0.0
    detector_pol_sensitivity: float = 0.0

    def __post_init__(self):
        if abs(self.retardance) >= MAX_BACKGROUND_RETARDANCE:
            raise ValueError(
                f"background retardance {self.retardance} rad outside the small-birefringence model "
                f"(|retardance| < {MAX_BACKGROUND_RETARDANCE})"
            )
        if not 0.0 <= self.detector_pol_sensitivity < 1.0:
            raise ValueError("detector_pol_sensitivity must be in [0, 1)")

    def jones(self, t=0.0) -> np.ndarray:
        return retarder_matrix(self.retardance, self.axis_angle)


@dataclass(frozen=True)
class TrainConfig:
    pem: PemConfig = field(default_factory=PemConfig)
    sample: Optional[SampleModel] = None
    background: Optional[BackgroundModel] = None
    input_polarizer_angle: float = np.pi / 4
    second_hwp_angle: float = 0.0
    input_power: float = 100e-6

    def __post_init__(self):
        if not self.input_power > 0.0:
            raise ValueError("input_power must be positive")

    @property
    def detector_pol_sensitivity(self) -> float:
        return self.background.detector_pol_sensitivity if self.background else 0.0


def element_operator(element, t: float = 0.0) -> PolarizationOperator:
    """Jones operator of a catalog element at time ``t`` (seconds)."""
    m = np.asarray(element.jones(t))
    if m.shape != (2, 2):
        raise ValueError("element_operator takes a scalar time")
    return PolarizationOperator.from_matrix(m)


def train_elements(train: TrainConfig) -> list:
    """Elements after the input polarizer, in propagation order."""
    elements = [train.pem]
    if train.sample is not None:
        elements.append(train.sample)
    if train.background is not None:
        elements.append(train.background)
    elements.append(half_wave_plate(train.second_hwp_angle))
    return elements


def output_field(train: TrainConfig, t) -> np.ndarray:
    """Field at the photodiode, shape ``t.shape + (2,)``."""
    t = np.asarray(t, dtype=float)
    a = train.input_polarizer_angle
    # the source is taken as already aligned with the input polarizer
    s0 = np.sqrt(train.input_power) * np.array([np.cos(a), np.sin(a)], dtype=complex)
    s = polarizer_matrix(a) @ s0
    s = np.broadcast_to(s, t.shape + (2,))
    for element in train_elements(train):
        s = np.einsum("...ij,...j->...i", element.jones(t), s)
    return s


def detector_power(train: TrainConfig, t):
    """Detected power (W) at time(s) ``t``; scalar in, float out."""
    e = output_field(train, t)
    eps = train.detector_pol_sensitivity
    p = (1.0 + eps) * np.abs(e[..., 0]) ** 2 + (1.0 - eps) * np.abs(e[..., 1]) ** 2
    return float(p) if np.ndim(p) == 0 else p


def closed_form_power(p0: float, eta_f: float, delta0: float, omega: float, t):
    """``P0 * (1 - sin(delta0 * sin(omega t)) * tanh(2 eta_f))``."""
    if not p0 > 0.0:
        raise ValueError("P0 must be positive")
    t = np.asarray(t, dtype=float)
    p = p0 * (1.0 - np.sin(delta0 * np.sin(omega * t)) * np.tanh(2.0 * eta_f))
    return float(p) if np.ndim(p) == 0 else p


def ideal_dc_power(train: TrainConfig) -> float:
    """Mean received power of the ideal train: ``P_in * t_mean^2 * cosh(2 eta_f)``."""
    if train.sample is None:
        return train.input_power
    s = train.sample
    return train.input_power * s.intensity_transmission * np.cosh(2.0 * s.eta_f)
