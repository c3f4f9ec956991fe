import numpy as np
import pytest

from icsparc.clipping import NO_CLIP, clip_power, cr_to_epsilon, power_scale
from icsparc.code import derive_params
from icsparc.denoisers import VAR_FLOOR, declip_moments, declip_posterior, demod_moments, demod_posterior, section_weights

from oracles import declip_grid, declip_quad, demod_enum


def test_declip_frozen_point():
    a = float(power_scale(0.5))
    m, v = declip_moments(np.array([0.3]), np.array([0.1]), 0.5, 0.5, a, 0.1)
    # produced by the quadrature oracle
    assert m[0] == pytest.approx(0.15590975283523767, abs=1e-10)
    assert v[0] == pytest.approx(0.04420901212637063, abs=1e-10)


@pytest.mark.parametrize("pt", declip_grid(60, seed=1))
def test_declip_matches_quadrature(pt):
    y, zp, v, eps, alpha, s2 = pt
    m_ref, v_ref = declip_quad(y, zp, v, eps, alpha, s2)
    m, var = declip_moments(np.array([y]), np.array([zp]), v, eps, alpha, s2)
    assert abs(m[0] - m_ref) < 1e-8
    assert abs(var[0] - v_ref) < 1e-8


def test_declip_linear_case():
    rng = np.random.default_rng(0)
    y, zp = rng.normal(size=(2, 50))
    m, v = declip_moments(y, zp, 0.3, 1e15, 1.0, 0.2)
    vv = 1 / (1 / 0.3 + 1 / 0.2)
    assert np.allclose(v, vv, rtol=1e-14)
    assert np.allclose(m, vv * (zp / 0.3 + y / 0.2), rtol=1e-13)


def test_declip_uninformative():
    rng = np.random.default_rng(1)
    y, zp = rng.normal(size=(2, 50))
    e = float(cr_to_epsilon(-6))
    m, v = declip_moments(y, zp, 0.5, e, float(power_scale(e)), 1e12)
    assert np.allclose(m, zp, rtol=1e-6, atol=1e-6)
    assert np.allclose(v, 0.5, rtol=1e-6)


def test_declip_sign_symmetry():
    pts = np.array(declip_grid(200, seed=4))
    for eps in (1e-15, 0.22, 1.3):
        a = float(power_scale(eps))
        m1, v1 = declip_moments(pts[:, 0], pts[:, 1], 0.2, eps, a, 0.5)
        m2, v2 = declip_moments(-pts[:, 0], -pts[:, 1], 0.2, eps, a, 0.5)
        assert np.allclose(m1, -m2, rtol=1e-12, atol=1e-14)
        assert np.allclose(v1, v2, rtol=1e-12, atol=1e-15)


def test_declip_contracts_and_floors():
    pts = np.array(declip_grid(500, seed=5))
    e = float(cr_to_epsilon(-13))
    _, vavg = declip_posterior(pts[:, 0], pts[:, 1], 0.3, e, float(power_scale(e)), 0.6)
    assert vavg < 0.3
    _, vmin = declip_posterior(np.zeros(4), np.zeros(4), 1e-20, e, float(power_scale(e)), 0.6)
    assert vmin == VAR_FLOOR


def test_declip_errors():
    with pytest.raises(ValueError):
        declip_moments(np.zeros(3), np.zeros(3), 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        declip_moments(np.zeros(3), np.zeros(3), 1.0, 1.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        declip_moments(np.zeros(3), np.zeros(2), 1.0, 1.0, 1.0, 1.0)


def test_declip_extreme_inputs_finite():
    # hard limiter with tiny prior variance and far-out observations
    eps = 1e-15
    y = np.array([-40.0, -1.0, 0.0, 1.0, 40.0])
    zp = np.array([5.0, -5.0, 0.0, 30.0, -30.0])
    for v in (1e-12, 1e-6, 1.0):
        m, var = declip_moments(y, zp, v, eps, float(power_scale(eps)), 0.05)
        assert np.all(np.isfinite(m)) and np.all(np.isfinite(var)) and np.all(var >= 0)


@pytest.mark.parametrize("B", [2, 4, 8])
def test_demod_matches_enumeration(B):
    rng = np.random.default_rng(B)
    for _ in range(40):
        v = 10 ** rng.uniform(-2, 1.5)
        x = np.zeros(B)
        x[rng.integers(B)] = np.sqrt(B)
        x_pri = x + np.sqrt(v) * rng.normal(size=B)
        w_ref, m_ref, var_ref = demod_enum(x_pri, v, B)
        w, _ = section_weights(x_pri, v, B)
        m, sec = demod_moments(x_pri, v, B)
        assert np.max(np.abs(w[0] - w_ref)) < 1e-10
        assert np.max(np.abs(m - m_ref)) < 1e-10
        assert abs(sec[0] - var_ref) < 1e-10


def test_demod_enumeration_b4_example():
    w_ref, m_ref, var_ref = demod_enum(np.array([2.0, 0, 0, 0]), 1.0, 4)
    m, v = demod_posterior(np.array([2.0, 0, 0, 0]), 1.0, 4)
    assert np.allclose(m, m_ref, atol=1e-12, rtol=0)
    assert v == pytest.approx(var_ref, abs=1e-12)
    # closed form: w0 = e^4 / (e^4 + 3)
    assert w_ref[0] == pytest.approx(np.exp(4) / (np.exp(4) + 3), rel=1e-14)


def test_demod_symmetry_and_limits():
    p = derive_params(16, 64, 0.5)
    m, v = demod_posterior(np.zeros(p.N), 0.7, p)
    assert np.allclose(m, 1 / 4) and v == pytest.approx(1 - 1 / 16)
    x = np.zeros(p.N)
    x[::16] = 4.0
    m, v = demod_posterior(x, 1e-8, p)
    assert np.allclose(m, x) and v == VAR_FLOOR
    with pytest.raises(ValueError):
        demod_posterior(x, 0.0, p)


def test_demod_weights_sum_to_one_and_complement():
    rng = np.random.default_rng(9)
    x = rng.normal(0, 30, size=64 * 50)
    w, comp = section_weights(x, 0.01, 64)
    assert np.allclose(w.sum(axis=1), 1, atol=1e-12)
    assert np.allclose(w + comp, 1, atol=1e-12)
    m, _ = demod_moments(x, 0.01, 64)
    assert np.allclose(m.reshape(-1, 64).sum(axis=1) / 8, 1, atol=1e-12)
