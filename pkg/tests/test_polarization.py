import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmcd.polarization import (
    CIRCULAR_BASIS,
    LINEAR_BASIS,
    PolarizationOperator,
    PolarizationState,
    apply,
    circular_diattenuator_matrix,
    compose,
    equal_up_to_phase,
    from_circular,
    polarizer_matrix,
    retarder_matrix,
    rotation,
    to_circular,
)

angles = st.floats(-np.pi, np.pi, allow_nan=False)
amps = st.floats(-3.0, 3.0, allow_nan=False)


def random_state(draw_re, draw_im):
    return PolarizationState(complex(draw_re[0], draw_im[0]), complex(draw_re[1], draw_im[1]))


def test_bases_are_unitary_inverses():
    np.testing.assert_allclose(LINEAR_BASIS @ CIRCULAR_BASIS, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(CIRCULAR_BASIS @ CIRCULAR_BASIS.conj().T, np.eye(2), atol=1e-15)


def test_circular_convention():
    # components are projections: (1, i)/sqrt2 is pure right-circular, (1, -i)/sqrt2 pure left
    s = np.sqrt(0.5)
    e_r, e_l = to_circular(PolarizationState(s, 1j * s))
    assert abs(e_r - 1) < 1e-15 and abs(e_l) < 1e-15
    e_r, e_l = to_circular(PolarizationState(s, -1j * s))
    assert abs(e_r) < 1e-15 and abs(e_l - 1) < 1e-15


def test_quarter_wave_plate_makes_left_circular():
    # diag(e^{i pi/4}, e^{-i pi/4}) on 45-degree linear light gives |e_L| = 1
    q = PolarizationOperator.from_matrix(np.diag([np.exp(0.25j * np.pi), np.exp(-0.25j * np.pi)]))
    out = q @ PolarizationState.linear(np.pi / 4)
    e_r, e_l = out.to_circular()
    assert abs(e_r) < 1e-12
    assert abs(abs(e_l) - 1.0) < 1e-12


def test_pure_faraday_rotation_direction():
    phi = 0.3
    m = circular_diattenuator_matrix(1.0, phi, 1.0, -phi)
    out = PolarizationOperator.from_matrix(m) @ PolarizationState(1.0, 0.0)
    # phi_R = +phi, phi_L = -phi rotates the plane by -phi in this convention
    assert equal_up_to_phase(out, PolarizationState(np.cos(phi), -np.sin(phi)))


def test_retarder_axes():
    # fast axis horizontal: x picks up exp(-i d/2), y picks up exp(+i d/2)
    d = 0.7
    np.testing.assert_allclose(retarder_matrix(d, 0.0), np.diag([np.exp(-0.5j * d), np.exp(0.5j * d)]), atol=1e-15)
    th = 0.4
    r = rotation(th)
    expected = r.T @ np.diag([np.exp(-0.5j * d), np.exp(0.5j * d)]) @ r
    np.testing.assert_allclose(retarder_matrix(d, th), expected, atol=1e-15)


def test_half_wave_plate_rotates_linear_by_twice_the_angle():
    th = 0.2
    out = PolarizationOperator.from_matrix(retarder_matrix(np.pi, th)) @ PolarizationState(1.0, 0.0)
    assert equal_up_to_phase(out, PolarizationState.linear(2 * th))


def test_compose_order_and_empty():
    a = PolarizationOperator.from_matrix(polarizer_matrix(0.0))
    b = PolarizationOperator.from_matrix(retarder_matrix(np.pi, np.pi / 8))
    np.testing.assert_allclose(compose([a, b]).matrix, b.matrix @ a.matrix)
    with pytest.raises(ValueError, match="empty train"):
        compose([])


def test_crossed_polarizers_block():
    ops = [PolarizationOperator.from_matrix(polarizer_matrix(a)) for a in (0.0, np.pi / 2)]
    out = compose(ops) @ PolarizationState(1.0, 0.3)
    assert out.intensity < 1e-30


def test_allclose_up_to_phase():
    m = PolarizationOperator.from_matrix(retarder_matrix(0.5, 0.1))
    shifted = PolarizationOperator.from_matrix(np.exp(0.9j) * m.matrix)
    assert not m.allclose(shifted)
    assert m.allclose(shifted, up_to_phase=True)


@settings(max_examples=60, deadline=None)
@given(st.tuples(amps, amps), st.tuples(amps, amps))
def test_circular_round_trip(re, im):
    s = random_state(re, im)
    back = from_circular(*to_circular(s))
    np.testing.assert_allclose(back.as_array(), s.as_array(), atol=1e-12)
    e_r, e_l = to_circular(s)
    assert abs(abs(e_r) ** 2 + abs(e_l) ** 2 - s.intensity) < 1e-10 * max(1.0, s.intensity)


@settings(max_examples=60, deadline=None)
@given(st.floats(-2 * np.pi, 2 * np.pi), angles, st.tuples(amps, amps), st.tuples(amps, amps))
def test_retarder_is_unitary_and_conserves_power(d, th, re, im):
    op = PolarizationOperator.from_matrix(retarder_matrix(d, th))
    assert op.is_unitary(1e-12)
    s = random_state(re, im)
    assert abs(apply(op, s).intensity - s.intensity) < 1e-10 * max(1.0, s.intensity)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0), angles, angles)
def test_passive_elements_never_amplify(t_r, t_l, p_r, p_l):
    op = PolarizationOperator.from_matrix(circular_diattenuator_matrix(t_r, p_r, t_l, p_l))
    assert op.max_singular_value() <= max(t_r, t_l) + 1e-12
    # circular states are eigenvectors
    out = op @ from_circular(1.0, 0.0)
    e_r, e_l = out.to_circular()
    assert abs(e_l) < 1e-12 and abs(abs(e_r) - t_r) < 1e-12


@settings(max_examples=40, deadline=None)
@given(angles)
def test_polarizer_is_projector(a):
    p = polarizer_matrix(a)
    np.testing.assert_allclose(p @ p, p, atol=1e-12)
    assert PolarizationOperator.from_matrix(p).max_singular_value() <= 1 + 1e-12
