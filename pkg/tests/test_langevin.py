import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qwlecam import langevin as lg
from qwlecam.errors import NonFinite
from qwlecam.langevin import (
    Ensemble,
    LangevinConfig,
    diagnostics,
    diagnostics_json,
    distance_correlation,
    grad_psi_eps,
    hamiltonian_path,
    integrate,
    integrate_overdamped,
    integrate_underdamped,
    observable_Xc,
    psi_eps,
    time_to_tv,
)
from qwlecam.limitlaw import KonnoLaw, pi_pdf, regularize
from qwlecam.params import build_params, hadamard, theta0


def fd_neg_log(f, y, h=1e-6):
    return -(math.log(f(y + h)) - math.log(f(y - h))) / (2 * h)


def test_gradient_examples():
    co = theta0().derived()
    assert grad_psi_eps(0.05, 0.1, co) == 0.0
    e2 = math.exp(-2)
    hand = -1 + 2 / (1 - 0.5 * e2) + 1 / (1 - e2) - 1
    assert grad_psi_eps(1.0, 0.05, co) == pytest.approx(hand, rel=1e-14)
    assert hand == pytest.approx(1.3016, abs=1e-4)
    assert abs(grad_psi_eps(10.0, 0.05, co) - 1) < 1e-3
    assert grad_psi_eps(-1.0, 0.05, co) == pytest.approx(-hand, rel=1e-14)


@pytest.mark.parametrize("p", [theta0(), hadamard(), build_params((0.3, -0.4, 0.5, 0.2, -0.1, 0.9))])
def test_gradient_matches_fd_of_density(p):
    eps = 0.05
    law = KonnoLaw(p)
    reg = regularize(law, eps)
    co = p.derived()
    y0 = reg.y0
    y = np.concatenate([np.linspace(-12, 12, 2000)])
    y = y[np.abs(np.abs(y) - y0) > 1e-3]
    worst = 0.0
    for yi in y:
        g = grad_psi_eps(float(yi), eps, co)
        if abs(yi) < y0:
            ref = 0.0
        else:
            # independent route: the unregularized density formula
            ref = fd_neg_log(lambda z: float(pi_pdf(z, law)), float(yi))
        worst = max(worst, abs(g - ref) / (1 + abs(g)))
    assert worst <= 1e-6
    # and the regularized negative log-density itself
    yy = np.array([-3.0, -0.5, 0.02, 0.7, 4.0])
    fd = np.array([-(psi_eps(v - 1e-6, reg) - psi_eps(v + 1e-6, reg)) / 2e-6 for v in yy])
    np.testing.assert_allclose(grad_psi_eps(yy, eps, co), fd, atol=1e-6)


@given(st.floats(0.02, 30.0))
def test_gradient_is_odd_at_theta0(y):
    co = theta0().derived()
    assert grad_psi_eps(-y, 0.01, co) == pytest.approx(-grad_psi_eps(y, 0.01, co), rel=1e-13)


def test_config_validation():
    with pytest.raises(ValueError):
        LangevinConfig(h=0.2)
    with pytest.raises(ValueError):
        LangevinConfig(chains=0)
    with pytest.raises(ValueError):
        LangevinConfig(burn_in=-1)
    with pytest.raises(ValueError):
        LangevinConfig(integrator="rk4")
    c = LangevinConfig(burn_in=0, horizon=1000, thin=10)
    assert c.retained == 100
    assert c.fingerprint("a") != c.fingerprint("b")


def test_determinism_bitwise():
    c = LangevinConfig(burn_in=100, horizon=2000, thin=10, chains=3, seed=9)
    a, b = integrate_underdamped(c), integrate_underdamped(c)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.v, b.v)
    assert a.fingerprint == b.fingerprint
    c2 = LangevinConfig(burn_in=100, horizon=2000, thin=10, chains=5, seed=9)
    # chain streams depend only on (seed, chain)
    assert np.array_equal(integrate_underdamped(c2).y[:3], a.y)
    o1, o2 = integrate_overdamped(c), integrate_overdamped(c)
    assert np.array_equal(o1.y, o2.y) and o1.v is None
    with pytest.raises(ValueError):
        integrate(c, "other")


def test_ensemble_is_readonly_and_exports():
    c = LangevinConfig(burn_in=0, horizon=100, thin=10, chains=2)
    e = integrate_underdamped(c)
    with pytest.raises(ValueError):
        e.y[0, 0] = 1.0
    lines = e.to_csv().splitlines()
    assert lines[1] == "chain,step,y,v"
    assert len(lines) == 2 + 2 * 10
    assert e.samples.shape == (20, 2)


def test_free_velocity_variance():
    c = LangevinConfig(potential="free", h=0.05, burn_in=200, horizon=200 * 1000,
                       thin=200, chains=100, seed=1)
    e = integrate_underdamped(c)
    v = e.v.ravel()
    assert v.size == 100_000
    se = math.sqrt(2 / v.size)  # variance of the sample variance of N(0, 1)
    assert abs(v.var() - 1) <= 3 * se
    assert abs(v.mean()) <= 3 / math.sqrt(v.size)


def _energy_error(potential, h, T=10.0, y=1.0, v=0.5):
    c = LangevinConfig(potential=potential, h=h, burn_in=0, horizon=int(round(T / h)),
                       thin=1, chains=1)
    e = hamiltonian_path(c, y, v)
    Y, V = e.y[0], e.v[0]
    if potential == "quadratic":
        E = 0.5 * Y**2 + 0.5 * V**2
        E0 = 0.5 * y**2 + 0.5 * v**2
    else:
        reg = regularize(KonnoLaw(c.params), c.epsilon)
        E = psi_eps(Y, reg) + 0.5 * V**2
        E0 = float(psi_eps(y, reg)) + 0.5 * v**2
    return float(np.max(np.abs(E - E0)))


def test_energy_error_is_second_order():
    e1 = _energy_error("quadratic", 0.02)
    e2 = _energy_error("quadratic", 0.01)
    assert e1 / e2 == pytest.approx(4, rel=0.1)
    assert e1 < 1e-3


def _energy_error_eps(eps, h, T=1.0, y=1.5, v=-2.0):
    c = LangevinConfig(epsilon=eps, h=h, burn_in=0, horizon=int(round(T / h)), thin=1, chains=1)
    e = hamiltonian_path(c, y, v)
    reg = regularize(KonnoLaw(c.params), eps)
    E = psi_eps(e.y[0], reg) + 0.5 * e.v[0] ** 2
    return float(np.max(np.abs(E - (float(psi_eps(y, reg)) + 0.5 * v * v)))), e


def test_refraction_conserves_energy_across_plateau():
    # the force jumps at the plateau edge, so the splitting error is O(h)
    # per crossing; refraction itself is energy-exact, so the error vanishes
    # with h
    errs = []
    for h in (0.004, 0.001, 0.00025):
        err, e = _energy_error_eps(0.3, h)
        assert np.any(np.abs(e.y[0]) < 0.3)  # the path crossed the plateau
        errs.append(err)
    assert errs[-1] < 1e-3
    assert errs[-1] < errs[0] / 4


def _coupled_overdamped(h, n_fine, xi, y_start=1.0):
    """Final state after time n_fine * h_fine using increments aggregated
    from the fine normals ``xi``."""
    m = xi.size // n_fine
    agg = xi.reshape(n_fine, m).sum(axis=1) / math.sqrt(m)
    out_y, out_v = np.empty(1), np.empty(1)
    status = lg._run_chain(1, 2, 1.0, h, y_start, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                           agg, np.zeros(n_fine), 0, n_fine, out_y, out_v)
    assert status == -1
    return out_y[0]


def test_overdamped_strong_order_on_quadratic():
    rng = np.random.default_rng(11)
    T, base = 1.0, 0.05
    n_ref = 1024
    errs = {1: [], 2: []}
    for _ in range(400):
        xi = rng.standard_normal(int(T / base) * n_ref // 1)
        ref = _coupled_overdamped(base / n_ref, xi.size, xi)
        for k in (1, 2):
            n = int(T / base) * k
            errs[k].append(_coupled_overdamped(base / k, n, xi) - ref)
    r1 = math.sqrt(np.mean(np.square(errs[1])))
    r2 = math.sqrt(np.mean(np.square(errs[2])))
    # additive noise: Euler-Maruyama has strong order one
    assert r1 / r2 == pytest.approx(2, rel=0.2)


@pytest.mark.slow
def test_overdamped_stationarity():
    c = LangevinConfig(h=0.001, burn_in=200_000, horizon=1_000_000, thin=500, chains=64, seed=2)
    e = integrate_overdamped(c)
    d = diagnostics(e)
    assert d["n"] == 64 * 2000
    assert d["tv_y"] <= 0.03


def test_observable_Xc():
    c = LangevinConfig(burn_in=0, horizon=10, thin=1, chains=2)
    y = np.full((2, 10), math.log(2))
    e = Ensemble(y=y, v=np.zeros_like(y), time_elapsed=0.1, fingerprint="x", config=c,
                 dynamics="test", record_times=np.arange(10) * 0.01)
    np.testing.assert_allclose(observable_Xc(e, 100), 100 / (2 * math.sqrt(2)), rtol=1e-14)
    e0 = Ensemble(y=np.zeros((1, 1)), v=None, time_elapsed=0, fingerprint="x", config=c,
                  dynamics="test", record_times=np.zeros(1))
    assert observable_Xc(e0, 10)[0] > 0  # sign(0) = +1
    r = integrate_underdamped(LangevinConfig(burn_in=0, horizon=500, thin=5, chains=4))
    assert np.all(np.abs(observable_Xc(r, 1)) < r.config.params.derived().abs_u11)


def test_distance_correlation():
    rng = np.random.default_rng(5)
    a, b = rng.standard_normal(1500), rng.standard_normal(1500)
    assert abs(distance_correlation(a, b)) < 0.05
    assert distance_correlation(a, a**2) > 0.2


def test_diagnostics_and_time_to_tv():
    c = LangevinConfig(burn_in=5000, horizon=20_000, thin=20, chains=16, seed=4)
    e = integrate_underdamped(c)
    d = json.loads(diagnostics_json(e))
    for k in ("tv_y", "v_mean", "v_var", "corr", "config", "bins", "range_y"):
        assert k in d
    assert d["bins"] == 128
    t, curve = time_to_tv(e, threshold=0.5)
    assert curve.size == e.y.shape[1] and t <= e.record_times[-1]


def test_nonfinite_error_fields():
    err = NonFinite(3, 17)
    assert err.chain == 3 and err.step == 17
