import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from qwlecam.errors import DomainError, UnsupportedBias
from qwlecam.limitlaw import KonnoLaw
from qwlecam.oscillation import (
    EXPLICIT_CONSTANT,
    PHASE_OFFSETS,
    STATIONARY_PHASE_TV,
    H_sigma,
    H_trace_csv,
    H_value,
    abs_H_integral,
    calibrate_phase_offset,
    decomposition_residual,
    lower_bound_chain,
    oscillation_nodes,
    phase,
    phase_point,
    telescoping_sum,
    triangle_sum,
)
from qwlecam.params import build_params, hadamard, theta0
from qwlecam.walk import evolve, randomize

R2 = math.sqrt(2)
XM = 1 / R2


def H_oracle(x, t):
    """H from the arccos definitions, without the sigma reparametrization."""
    a = np.arccos(x / np.sqrt(1 - x * x))
    b = np.arccos((2 * x - 1) / (R2 * (1 - x)))
    w = np.arcsin(np.sin(a) / R2)
    return R2 * x * np.sin(2 * (w + x * a) * t - b)


@given(st.floats(-0.7, 0.7))
def test_phase_point_definitions(x):
    pp = phase_point(x)
    assert math.cos(pp.alpha_x) == pytest.approx(x / math.sqrt(1 - x * x), abs=1e-12)
    assert math.cos(pp.beta_x) == pytest.approx((2 * x - 1) / (R2 * (1 - x)), abs=1e-12)
    assert pp.omega_alpha == pytest.approx(math.asin(math.sin(pp.alpha_x) / R2), abs=1e-12)
    assert 0 <= pp.alpha_x <= math.pi and 0 <= pp.beta_x <= math.pi


def test_phase_point_at_zero():
    pp = phase_point(0.0)
    assert pp.alpha_x == pytest.approx(math.pi / 2)
    assert pp.omega_alpha == pytest.approx(math.pi / 4)
    assert pp.beta_x == pytest.approx(3 * math.pi / 4)


def test_H_value_basic():
    assert H_value(0.0, 123) == 0.0
    x = np.linspace(-0.7, 0.7, 2001)
    for t in (1, 10, 1000):
        h = H_value(x, t)
        assert np.all(np.abs(h) <= R2 * np.abs(x) + 1e-15)
        np.testing.assert_allclose(h, H_oracle(x, t), atol=1e-9 * t)
    with pytest.raises(DomainError):
        H_value(0.71, 10)


def test_phase_is_equidistributed():
    x = np.linspace(-XM, XM, 10002)[1:-1]
    for t in (1000, 10000):
        ph = np.mod(phase(x, t), 2 * np.pi) / (2 * np.pi)
        assert stats.kstest(ph, "uniform").statistic < 0.05


@pytest.mark.parametrize("t", [100, 1000, 10000])
def test_nodes(t):
    n = oscillation_nodes(t)
    assert np.all(np.diff(n.x) > 0)
    assert np.max(np.abs(H_sigma(n.sigma, t))) < 1e-9
    # in x the ends are ill-conditioned: one ulp of x moves the phase by
    # about |dphase/dx| * ulp, with dphase/dx ~ 4 t / cos(sigma)
    slope = 4.0 * t / np.cos(n.sigma) + 10.0
    assert np.all(np.abs(H_value(n.x, t)) <= 1e-9 + 4 * slope * np.spacing(np.abs(n.x)))
    mid = H_value(n.mid_x, t)
    assert np.all(np.abs(mid) >= np.abs(n.mid_x) / 2)
    assert np.all(np.abs(mid) >= np.abs(n.mid_x) / R2 * (1 - 1e-9))


def test_node_count_grows_linearly():
    a, b = oscillation_nodes(1000).count, oscillation_nodes(2000).count
    assert b / a == pytest.approx(2, rel=0.1)


def test_abs_H_integral_against_dense_quadrature():
    t = 150
    x = np.linspace(-XM, XM, 2_000_001)
    ref = np.trapezoid(np.abs(H_oracle(x[1:-1], t)), x[1:-1])
    assert abs_H_integral(t) == pytest.approx(ref, abs=1e-6)


@pytest.mark.parametrize("t", [100, 1000, 10000])
def test_abs_H_integral_bounds(t):
    v = abs_H_integral(t)
    assert 1 / (4 * R2) - 0.01 <= v <= 1 / R2
    if t == 10000:
        assert abs(v - R2 / math.pi) < 0.02


def test_chain_functionals():
    t = 10000
    # |xi_l| dx_l / 4 is a Riemann sum of int |x| dx / 4 = 1/8
    assert triangle_sum(t) == pytest.approx(1 / 8, abs=0.005)
    assert telescoping_sum(t) == pytest.approx(1 / 16, abs=1e-3)
    rep = lower_bound_chain(1000, with_plateau=False)
    assert rep.lower_bound_chain["explicit_constant"] == pytest.approx(1 / (8 * R2 * math.pi), rel=1e-15)
    assert EXPLICIT_CONSTANT == pytest.approx(0.0281349, rel=1e-5)
    assert rep.abs_H_integral >= 0 and rep.f_weighted_integral >= 0
    assert '"lower_bound_chain"' in rep.to_json()


def test_stated_H_does_not_describe_walk():
    # the stated oscillation explains almost none of the walk's deviation
    # from f, at every calibrated offset
    x = np.linspace(-0.6, 0.6, 241)
    _, scores = calibrate_phase_offset(theta0())
    base = decomposition_residual(theta0(), 1024, x, phase_offset=0.0, model="stated")
    env = np.sqrt(np.mean((2 * x**2 * KonnoLaw(theta0()).pdf(x)) ** 2 / 2))
    assert min(scores.values()) > 0.5 * env
    assert base.rms > 0.1


def test_stationary_model_residual_is_order_one_over_t():
    x = np.linspace(-0.6, 0.6, 241)
    off, _ = calibrate_phase_offset(theta0(), model="stationary")
    assert off in PHASE_OFFSETS
    r1 = decomposition_residual(theta0(), 1024, x, model="stationary").rms
    r4 = decomposition_residual(theta0(), 4096, x, model="stationary").rms
    assert r4 < r1 / 4 * 1.5
    assert r1 < 2e-3


def test_slow_part_and_tail():
    t = 2048
    d = evolve(theta0(), t)
    r = randomize(d, 0.02)
    assert abs(t * r.prob_at(0) - 1 / math.pi) < 0.05
    k = np.arange(-t, t + 1)
    far = np.abs(k / t) > XM + 0.05
    assert np.all(t * d.prob_at(k[far]) <= 1e-6)


def test_unsupported_bias():
    p = build_params((0.0, math.pi / 2, math.pi / 4, 0.0, 0.0, 0.6))
    with pytest.raises(UnsupportedBias):
        decomposition_residual(p, 64, [0.0])


def test_plateau_prediction_constant():
    assert STATIONARY_PHASE_TV == pytest.approx(2 * (1 - 1 / R2) / math.pi)


def test_trace_csv():
    text = H_trace_csv(100, np.linspace(-0.5, 0.5, 5))
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert lines[0] == "x,H"
    assert len(lines) == 6


def test_hadamard_is_supported():
    assert decomposition_residual(hadamard(), 64, [0.0]).rms >= 0
