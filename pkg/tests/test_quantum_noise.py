import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmcd.quantum_noise import (
    LossBudget,
    PhotocurrentStats,
    SqueezedSourceModel,
    apply_loss,
    estimate_noise_floor_db,
    lossless_stats,
    noise_floor_db,
    noise_floor_linear,
    photon_energy,
    sample_fluctuations,
)

gains = st.floats(1.0, 20.0)
etas = st.floats(0.01, 1.0)


def quadrature_oracle(g, n, eta_p, eta_c):
    """Linearized amplitude-quadrature model of an amplifier followed by beam splitters.

    Inputs (unit-variance quadratures): seeded probe, vacuum conjugate, and
    one vacuum port per loss. Photon-number fluctuation = mean amplitude x
    amplitude quadrature.
    """
    sg, sg1 = math.sqrt(g), math.sqrt(g - 1)
    a = np.array([sg, sg1, 0.0, 0.0])
    b = np.array([sg1, sg, 0.0, 0.0])
    a = math.sqrt(eta_p) * a + math.sqrt(1 - eta_p) * np.array([0, 0, 1.0, 0])
    b = math.sqrt(eta_c) * b + math.sqrt(1 - eta_c) * np.array([0, 0, 0, 1.0])
    amp_p = math.sqrt(eta_p * g * n)
    amp_c = math.sqrt(eta_c * (g - 1) * n)
    lp, lc = amp_p * a, amp_c * b
    return dict(
        mean_p=eta_p * g * n, mean_c=eta_c * (g - 1) * n,
        var_p=lp @ lp, var_c=lc @ lc, cov_pc=lp @ lc,
    )


def test_photon_energy_795nm():
    assert photon_energy(795e-9) == pytest.approx(2.4986e-19, rel=1e-4)


def test_source_and_budget():
    src = SqueezedSourceModel(gain=2.0, probe_mean_power=100e-6)
    assert src.conjugate_mean_power == pytest.approx(50e-6)
    n = src.seed_photons_per_sample(1e6)
    assert src.gain * n * photon_energy(795e-9) * 1e6 == pytest.approx(100e-6)
    b = LossBudget().with_probe("window", 0.9).with_conjugate("mirror", 0.8)
    assert b.probe_transmission == pytest.approx(0.9 * 0.95)
    assert b.conjugate_transmission == pytest.approx(0.8 * 0.95)
    with pytest.raises(ValueError, match="window"):
        LossBudget(probe_path=(("window", 1.2),))
    with pytest.raises(ValueError):
        SqueezedSourceModel(gain=0.9)


@pytest.mark.parametrize("g", [1.0, 1.5, 2.2842, 5.0])
@pytest.mark.parametrize("eta_p,eta_c", [(1.0, 1.0), (0.76, 0.76), (0.5, 0.9)])
def test_stats_match_quadrature_oracle(g, eta_p, eta_c):
    n = 1e4
    s = apply_loss(lossless_stats(SqueezedSourceModel(g), n), eta_p, eta_c)
    ref = quadrature_oracle(g, n, eta_p, eta_c)
    for key, val in ref.items():
        assert getattr(s, key) == pytest.approx(val, rel=1e-12, abs=1e-9)


def test_lossless_floor_and_limits():
    for g in (1.0, 2.0, 7.5):
        s = lossless_stats(SqueezedSourceModel(g), 1e3)
        assert s.normalized_difference_variance == pytest.approx(1 / (2 * g - 1), rel=1e-12)
    assert noise_floor_linear(1.0, 0.3) == 1.0
    assert noise_floor_linear(2.0, 0.0) == 1.0
    # 1 - 2(0.76)(1.29)/3.58 = 0.452291 -> -3.44583 dB
    assert noise_floor_linear(2.29, 0.76) == pytest.approx(0.4522905, abs=1e-7)
    assert noise_floor_db(2.29, 0.76) == pytest.approx(-3.44583, abs=1e-5)


def test_input_validation():
    with pytest.raises(ValueError):
        noise_floor_linear(0.5, 0.5)
    with pytest.raises(ValueError):
        noise_floor_linear(2.0, 1.5)
    with pytest.raises(ValueError):
        apply_loss(PhotocurrentStats.coherent(10.0), 0.0, 1.0)
    with pytest.raises(ValueError, match="unphysical"):
        sample_fluctuations(PhotocurrentStats(10, 10, 1, 1, 5), 10, 0)


@settings(max_examples=80, deadline=None)
@given(gains, etas)
def test_equal_loss_floor_formula(g, eta):
    s = apply_loss(lossless_stats(SqueezedSourceModel(g), 1e5), eta, eta)
    assert s.normalized_difference_variance == pytest.approx(noise_floor_linear(g, eta), rel=1e-12)
    assert 1 - eta - 1e-12 <= noise_floor_linear(g, eta) <= 1 + 1e-12


@settings(max_examples=60, deadline=None)
@given(gains, etas, etas, etas)
def test_loss_composes_and_stays_physical(g, e1, e2, ec):
    s = lossless_stats(SqueezedSourceModel(g), 1e5)
    two = apply_loss(apply_loss(s, e1, ec), e2, 1.0)
    one = apply_loss(s, e1 * e2, ec)
    for key in ("mean_p", "var_p", "var_c", "cov_pc"):
        assert getattr(two, key) == pytest.approx(getattr(one, key), rel=1e-10)
    assert one.is_physical()
    # loss pulls each Fano factor toward 1
    assert abs(one.fano_p - 1) <= abs(s.fano_p - 1) + 1e-12


@settings(max_examples=40, deadline=None)
@given(gains, st.floats(0.01, 0.99))
def test_floor_monotone(g, eta):
    assert noise_floor_linear(g + 0.5, eta) <= noise_floor_linear(g, eta) + 1e-15
    assert noise_floor_linear(g, eta + 0.01) <= noise_floor_linear(g, eta) + 1e-15


def test_coherent_reference_is_shot_noise():
    s = PhotocurrentStats.coherent(500.0, 300.0)
    assert s.noise_floor_db == pytest.approx(0.0, abs=1e-12)
    p, c = sample_fluctuations(s, 200_000, 3)
    assert np.var(p - c) / 800.0 == pytest.approx(1.0, rel=0.02)
    assert abs(np.corrcoef(p, c)[0, 1]) < 0.01


def test_monte_carlo_floor():
    s = apply_loss(lossless_stats(SqueezedSourceModel(2.5), 1e4), 0.8, 0.8)
    p, c = sample_fluctuations(s, 1_000_000, 11)
    lin = 10 ** (estimate_noise_floor_db(p, c, s) / 10)
    assert lin == pytest.approx(noise_floor_linear(2.5, 0.8), rel=0.03)
    assert np.var(p) == pytest.approx(s.var_p, rel=0.01)
    assert np.cov(p, c)[0, 1] == pytest.approx(s.cov_pc, rel=0.01)


def test_sampling_is_deterministic_and_schedule_free():
    s = apply_loss(lossless_stats(SqueezedSourceModel(2.0), 1e3), 0.7, 0.9)
    a = sample_fluctuations(s, 300_000, 5, chunk_size=4096)
    b = sample_fluctuations(s, 300_000, 5, chunk_size=4096, workers=4)
    c = sample_fluctuations(s, 300_000, 6, chunk_size=4096)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert not np.array_equal(a[0], c[0])


def test_difference_channel_shares_randomness():
    # the same seed gives difference noise that differs only by a scale factor
    sq = apply_loss(lossless_stats(SqueezedSourceModel(2.0), 1e4), 0.8, 0.8)
    cl = PhotocurrentStats.coherent(sq.mean_p, sq.mean_c)
    p1, c1 = sample_fluctuations(sq, 1000, 9)
    p2, c2 = sample_fluctuations(cl, 1000, 9)
    ratio = (p1 - c1) / (p2 - c2)
    np.testing.assert_allclose(ratio, math.sqrt(sq.normalized_difference_variance), rtol=1e-9)


@settings(max_examples=60, deadline=None)
@given(gains, etas, etas)
def test_fano_factors_at_least_one(g, ep, ec):
    s = apply_loss(lossless_stats(SqueezedSourceModel(g), 1e5), ep, ec)
    assert s.fano_p >= 1 - 1e-9 and s.fano_c >= 1 - 1e-9


def test_gain_two_lossless():
    s = lossless_stats(SqueezedSourceModel(2.0), 1e3)
    assert s.noise_floor_db == pytest.approx(10 * math.log10(1 / 3), abs=1e-12)
    s1 = lossless_stats(SqueezedSourceModel(1.0), 1e3)
    assert s1.mean_c == 0 and s1.var_p == pytest.approx(1e3)


def test_rank_one_and_uncorrelated_sampling():
    p, c = sample_fluctuations(PhotocurrentStats(1e3, 1e3, 1.0, 1.0, 1.0), 1000, 2)
    np.testing.assert_allclose(p, c, atol=1e-12)
    p, c = sample_fluctuations(PhotocurrentStats(1e3, 1e3, 1.0, 1.0, 0.0), 1_000_000, 2)
    assert abs(np.corrcoef(p, c)[0, 1]) < 0.005


def test_monte_carlo_snl_calibration():
    s = PhotocurrentStats.coherent(4e4, 3e4)
    p, c = sample_fluctuations(s, 1_000_000, 8)
    assert estimate_noise_floor_db(p, c, s) == pytest.approx(0.0, abs=0.05)


def test_spec_operating_point_095():
    s = apply_loss(lossless_stats(SqueezedSourceModel(2.29), 1e4), 0.95, 0.95)
    assert s.normalized_difference_variance == pytest.approx(0.3154, abs=1e-4)
