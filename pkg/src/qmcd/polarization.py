"""Jones-calculus polarization algebra.

Fields are complex 2-vectors ``(ex, ey)`` in sqrt(watt) units and optical
elements are complex 2x2 amplitude transfer matrices.

Circular basis convention (used everywhere in the package)::

    e_R = (e_x - i e_y) / sqrt(2)
    e_L = (e_x + i e_y) / sqrt(2)

Global phases are never normalized away.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

_SQRT1_2 = 1.0 / np.sqrt(2.0)

#: linear -> circular change of basis, ``[eR, eL] = CIRCULAR_BASIS @ [ex, ey]``
CIRCULAR_BASIS = _SQRT1_2 * np.array([[1.0, -1.0j], [1.0, 1.0j]])
#: circular -> linear (the conjugate transpose of ``CIRCULAR_BASIS``)
LINEAR_BASIS = CIRCULAR_BASIS.conj().T


@dataclass(frozen=True)
class PolarizationState:
    """Fully polarized field with horizontal/vertical complex amplitudes."""

    ex: complex
    ey: complex

    @classmethod
    def linear(cls, angle: float, power: float = 1.0) -> "PolarizationState":
        a = np.sqrt(power)
        return cls(complex(a * np.cos(angle)), complex(a * np.sin(angle)))

    @classmethod
    def from_array(cls, v) -> "PolarizationState":
        v = np.asarray(v, dtype=complex)
        return cls(complex(v[0]), complex(v[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.ex, self.ey], dtype=complex)

    @property
    def intensity(self) -> float:
        return abs(self.ex) ** 2 + abs(self.ey) ** 2

    def to_circular(self) -> tuple[complex, complex]:
        return to_circular(self)

    @classmethod
    def from_circular(cls, e_r: complex, e_l: complex) -> "PolarizationState":
        return from_circular(e_r, e_l)


@dataclass(frozen=True)
class PolarizationOperator:
    """2x2 Jones matrix ``[[m00, m01], [m10, m11]]``."""

    m00: complex
    m01: complex
    m10: complex
    m11: complex

    @classmethod
    def from_matrix(cls, m) -> "PolarizationOperator":
        m = np.asarray(m, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        return cls(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))

    @classmethod
    def identity(cls) -> "PolarizationOperator":
        return cls(1.0 + 0j, 0j, 0j, 1.0 + 0j)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.m00, self.m01], [self.m10, self.m11]], dtype=complex)

    def __matmul__(self, other):
        if isinstance(other, PolarizationOperator):
            return PolarizationOperator.from_matrix(self.matrix @ other.matrix)
        if isinstance(other, PolarizationState):
            return apply(self, other)
        return NotImplemented

    def max_singular_value(self) -> float:
        return float(np.linalg.svd(self.matrix, compute_uv=False)[0])

    def is_unitary(self, atol: float = 1e-12) -> bool:
        m = self.matrix
        return bool(np.allclose(m.conj().T @ m, np.eye(2), rtol=0.0, atol=atol))

    def allclose(self, other: "PolarizationOperator", atol: float = 1e-12, up_to_phase: bool = False) -> bool:
        a, b = self.matrix, other.matrix
        if up_to_phase:
            # align the global phase on the largest entry of ``b``
            k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
            if abs(a[k]) == 0.0:
                return bool(np.allclose(a, b, rtol=0.0, atol=atol))
            a = a * (b[k] / a[k]) / abs(b[k] / a[k])
        return bool(np.allclose(a, b, rtol=0.0, atol=atol))


def apply(op: PolarizationOperator, s: PolarizationState) -> PolarizationState:
    return PolarizationState(
        op.m00 * s.ex + op.m01 * s.ey,
        op.m10 * s.ex + op.m11 * s.ey,
    )


def compose(ops: Sequence[PolarizationOperator]) -> PolarizationOperator:
    """Collapse a train into one operator.

    ``ops[0]`` is the first element the light traverses, so the product is
    ``ops[-1] @ ... @ ops[0]``.
    """
    if len(ops) == 0:
        raise ValueError("empty train")
    m = ops[0].matrix
    for op in ops[1:]:
        m = op.matrix @ m
    return PolarizationOperator.from_matrix(m)


def to_circular(s: PolarizationState) -> tuple[complex, complex]:
    e_r = _SQRT1_2 * (s.ex - 1j * s.ey)
    e_l = _SQRT1_2 * (s.ex + 1j * s.ey)
    return complex(e_r), complex(e_l)


def from_circular(e_r: complex, e_l: complex) -> PolarizationState:
    return PolarizationState(
        complex(_SQRT1_2 * (e_r + e_l)),
        complex(1j * _SQRT1_2 * (e_r - e_l)),
    )


def equal_up_to_phase(a: PolarizationState, b: PolarizationState, atol: float = 1e-12) -> bool:
    """True when ``a == exp(i phi) b`` for some real ``phi``."""
    va, vb = a.as_array(), b.as_array()
    overlap = np.vdot(vb, va)
    if abs(overlap) == 0.0:
        return bool(np.allclose(va, vb, rtol=0.0, atol=atol))
    return bool(np.allclose(va, vb * overlap / abs(overlap), rtol=0.0, atol=atol))


# -- matrix builders (plain ndarrays, broadcast over leading axes) -------------

def rotation(theta) -> np.ndarray:
    """Coordinate rotation ``R(theta) = [[c, s], [-s, c]]``."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = s
    out[..., 1, 0] = -s
    out[..., 1, 1] = c
    return out


def retarder_matrix(retardance, axis_angle=0.0) -> np.ndarray:
    """Linear retarder with its fast axis at ``axis_angle`` from horizontal.

    In its own frame the fast axis picks up ``exp(-i*retardance/2)`` and the
    slow axis ``exp(+i*retardance/2)``. Broadcasts over array ``retardance``.
    """
    delta = np.asarray(retardance, dtype=float)
    c, s = np.cos(axis_angle), np.sin(axis_angle)
    a = np.exp(-0.5j * delta)
    b = np.exp(0.5j * delta)
    out = np.empty(delta.shape + (2, 2), dtype=complex)
    # R(-theta) @ diag(a, b) @ R(theta), expanded
    out[..., 0, 0] = a * c * c + b * s * s
    out[..., 0, 1] = (a - b) * c * s
    out[..., 1, 0] = (a - b) * c * s
    out[..., 1, 1] = a * s * s + b * c * c
    return out


def polarizer_matrix(angle) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c * c, c * s], [c * s, s * s]], dtype=complex)


def circular_diattenuator_matrix(t_r: float, phi_r: float, t_l: float, phi_l: float) -> np.ndarray:
    """``diag(t_R e^{i phi_R}, t_L e^{i phi_L})`` in the circular basis, returned in the linear basis."""
    d = np.diag([t_r * np.exp(1j * phi_r), t_l * np.exp(1j * phi_l)])
    return LINEAR_BASIS @ d @ CIRCULAR_BASIS
