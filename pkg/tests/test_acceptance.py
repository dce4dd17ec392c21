"""The twelve acceptance criteria, one test each, run at their stated
tolerances. Each test records a single PASS/FAIL line that is printed in
the terminal summary."""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from qwlecam import walk
from qwlecam.distances import (
    FiniteDist,
    StochasticKernel,
    align,
    bound_check,
    deficiency_lp,
    deficiency_upper,
    discretization_kernel,
    finite_from_masses,
    hellinger,
    tv,
    uniform_convolution_kernel,
)
from qwlecam.experiments import smoothed_tv
from qwlecam.langevin import (
    LangevinConfig,
    acceleration_comparison,
    diagnostics,
    grad_psi_eps,
    integrate_underdamped,
    observable_Xc,
    x_tv,
)
from qwlecam.limitlaw import KonnoLaw, kappa_eps, konno_pdf, pi_pdf, plateau_deficit, regularize
from qwlecam.oscillation import (
    EQUIDISTRIBUTION_HEURISTIC,
    EXPLICIT_CONSTANT,
    STATIONARY_PHASE_TV,
    H_sigma,
    abs_H_integral,
    oscillation_nodes,
    plateau_tv,
)
from qwlecam.params import hadamard, theta0
from qwlecam.walk import default_edges, evolve, randomize, smooth_cdf

R2 = math.sqrt(2)
pytestmark = pytest.mark.acceptance


def _fmt(v, d=4):
    return f"{v:.{d}g}"


def test_c01_exact_walk_oracle(criterion):
    expected = {
        1: {-1: 0.5, 1: 0.5},
        2: {-2: 0.25, 0: 0.5, 2: 0.25},
        3: {-3: 0.125, -1: 0.125, 1: 0.625, 3: 0.125},
    }
    p = hadamard()
    err = 0.0
    for t, ref in expected.items():
        d = evolve(p, t)
        for k in range(-t, t + 1):
            err = max(err, abs(d.prob_at(k) - ref.get(k, 0.0)))
    best = math.inf
    for _ in range(20):
        walk._evolve_probs.cache_clear()
        t0 = time.perf_counter()
        for t in expected:
            evolve(p, t)
        best = min(best, time.perf_counter() - t0)
    criterion(1, "exact walk oracle", [
        ("max_abs_err", err <= 1e-12, _fmt(err)),
        ("runtime_ms", best < 1e-3, _fmt(best * 1e3, 3)),
    ])


def test_c02_unitarity_and_parity(criterion):
    t0 = time.perf_counter()
    worst, parity_ok = 0.0, True
    for p in (theta0(), hadamard()):
        for t in (1, 2, 3, 10, 99, 1000, 4097, 10_000):
            d = evolve(p, t)
            worst = max(worst, abs(1 - d.probs.sum()))
            k = d.sites
            parity_ok &= bool(np.all(d.probs[(k + t) % 2 == 1] == 0.0))
    el = time.perf_counter() - t0
    criterion(2, "unitarity and parity", [
        ("max_mass_err", worst < 1e-10, _fmt(worst)),
        ("forbidden_parity_zero", parity_ok, parity_ok),
        ("runtime_s", el < 60, _fmt(el, 3)),
    ])


def test_c03_limit_law_constants(criterion):
    law = KonnoLaw(theta0())
    u = law.abs_u11
    f0 = float(konno_pdf(0.0, law))

    def mom(g):
        # x = u sin(s) removes the endpoint singularities
        val, _ = integrate.quad(lambda s: g(u * math.sin(s)) * float(law.pdf(u * math.sin(s)))
                                * u * math.cos(s), -math.pi / 2, math.pi / 2,
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        return val

    m2 = mom(lambda x: x * x)
    m_abs = mom(abs)
    wm2 = evolve(theta0(), 8192).moment(2)
    target = 1 - 1 / R2
    criterion(3, "limit-law constants at theta0", [
        ("f(0)*pi", abs(f0 * math.pi - 1) < 1e-14, _fmt(f0 * math.pi, 16)),
        ("int x^2 f", abs(m2 - target) < 1e-6, _fmt(m2, 10)),
        ("int |x| f", abs(m_abs - 0.5) < 1e-6, _fmt(m_abs, 10)),
        ("walk E[(X/t)^2] t=8192", abs(wm2 - target) < 0.01, _fmt(wm2, 6)),
    ])


def test_c04_randomization_closes_gap(criterion):
    p = theta0()
    law = KonnoLaw(p)
    t0 = time.perf_counter()
    etas = (0.08, 0.02, 0.005)
    tvs = [smoothed_tv(p, 8192, eta, law) for eta in etas]
    ratios = [tvs[i] / tvs[i + 1] for i in range(2)]
    el = time.perf_counter() - t0
    criterion(4, "smoothed walk vs limit law, t=8192", [
        ("tv(eta=0.02)", tvs[1] <= 0.05, _fmt(tvs[1])),
        ("ratios", all(1.3 <= r <= 3.2 for r in ratios), [round(r, 3) for r in ratios]),
        ("runtime_s", el < 300, _fmt(el, 3)),
    ], info=f"tv over eta {etas} = {[round(v, 4) for v in tvs]}")


def test_c05_nonequivalence_plateau(criterion):
    t0 = time.perf_counter()
    ts = (1024, 2048, 4096, 8192)
    vals = {t: plateau_tv(t) for t in ts}
    el = time.perf_counter() - t0
    ref = vals[8192]
    band = max(abs(v - ref) for v in vals.values())
    criterion(5, "TV plateau of walk vs sublattice limit law", [
        ("max_dev_from_t8192", band <= 0.02, _fmt(band)),
        ("plateau/explicit_bound", ref >= 5 * EXPLICIT_CONSTANT, _fmt(ref / EXPLICIT_CONSTANT)),
        ("runtime_s", el < 600, _fmt(el, 3)),
    ], info=(f"plateau={ref:.4f}, equidistribution heuristic={EQUIDISTRIBUTION_HEURISTIC:.4f}, "
             f"stationary-phase prediction={STATIONARY_PHASE_TV:.4f}, reported c0=0.3"))


def test_c06_oscillation_functionals(criterion):
    t = 10_000
    v = abs_H_integral(t)
    n = oscillation_nodes(t)
    res = float(np.max(np.abs(H_sigma(n.sigma, t))))
    criterion(6, "oscillation functionals, t=1e4", [
        ("|int|H| - sqrt2/pi|", abs(v - R2 / math.pi) <= 0.02, _fmt(abs(v - R2 / math.pi))),
        ("int|H| >= 0.1668", v >= 0.1668, _fmt(v, 6)),
        ("max node residual", res < 1e-9, _fmt(res)),
    ], info=f"{n.count} nodes")


def test_c07_kappa(criterion):
    law = KonnoLaw(theta0())
    u = law.abs_u11
    p = theta0()
    worst_id, ratio_ok, ratios, x_ratios = 0.0, True, [], []
    for eps in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5):
        a = u * (1 - eps)
        s = math.asin(a / u)
        inner, _ = integrate.quad(
            lambda z: float(law.pdf(u * math.sin(z))) * u * math.cos(z), -s, s,
            epsabs=1e-14, epsrel=1e-13, limit=200)
        kx = kappa_eps(eps, law, "x")
        worst_id = max(worst_id, abs(2 * eps * u * kx - (1 - inner)))
        lead = R2 / (math.pi * math.sqrt(eps) * math.sqrt(1 - u * u))
        # the closed-form leading term is the height of the y-form plateau
        r = kappa_eps(eps, law, "y") / lead
        ratios.append(round(r, 5))
        x_ratios.append(round(kx / lead, 4))
        ratio_ok &= abs(r - 1) <= 2 * math.sqrt(eps)
    del p
    criterion(7, "plateau height", [
        ("max |2 eps u kappa - deficit|", worst_id <= 1e-10, _fmt(worst_id)),
        ("y-form leading-order ratios", ratio_ok, ratios),
    ], info=f"x-form height / leading term = {x_ratios} (factor 1/u)")


def test_c08_gradient(criterion):
    eps = 0.05
    law = KonnoLaw(theta0())
    reg = regularize(law, eps)
    co = theta0().derived()
    y = np.linspace(-15, 15, 2000)
    y = y[np.abs(np.abs(y) - reg.y0) > 1e-3]
    h = 1e-6
    worst = 0.0
    for yi in y:
        g = grad_psi_eps(float(yi), eps, co)
        fd = -(math.log(float(reg.pdf_y(yi + h))) - math.log(float(reg.pdf_y(yi - h)))) / (2 * h)
        worst = max(worst, abs(g - fd) / (1 + abs(g)))
    lim = grad_psi_eps(10.0, eps, co)
    criterion(8, "gradient vs finite differences", [
        ("max rel err", worst <= 1e-6, _fmt(worst)),
        ("grad(10) - 1", abs(lim - 1) <= 1e-3, _fmt(lim - 1)),
    ], info=f"{y.size} points")


def test_c09_langevin_stationarity(criterion):
    cfg = LangevinConfig(epsilon=0.05, params=theta0(), h=0.01, burn_in=100_000,
                         horizon=100_000, thin=50, chains=64, seed=0)
    t0 = time.perf_counter()
    ens = integrate_underdamped(cfg)
    el = time.perf_counter() - t0
    d = diagnostics(ens)
    reg = regularize(KonnoLaw(cfg.params), cfg.epsilon)
    t = 4096
    txc = x_tv(observable_Xc(ens, t) / t, reg)
    criterion(9, "underdamped Langevin stationarity", [
        ("tv_y", d["tv_y"] <= 0.03, _fmt(d["tv_y"])),
        ("|v_var-1|", abs(d["v_var"] - 1) <= 0.02, _fmt(abs(d["v_var"] - 1))),
        ("|corr|", abs(d["corr"]) <= 0.02, _fmt(abs(d["corr"]))),
        ("tv(Xc/t, Q_eps)", txc.tv <= 0.05, _fmt(txc.tv)),
        ("runtime_s", el < 300, _fmt(el, 3)),
    ], info=f"n={d['n']}, histogram noise floor {d['tv_y_bias']:.4f}")


def test_c10_kernel_identities(criterion):
    t, eta = 4096, 0.02
    r = randomize(evolve(theta0(), t), eta)
    edges = default_edges(t, eta + 1 / t, 1 / (4 * t))
    C = uniform_convolution_kernel(t, 1 / (2 * t), r.sites, edges)
    lo, hi = int(round(edges[0] * t)), int(round(edges[-1] * t))
    D = discretization_kernel(t, edges, np.arange(lo, hi + 1))
    a, b = align(r, D(C(r)))
    rt = float(np.max(np.abs(a.probs - b.probs)))

    rng = np.random.default_rng(2024)
    tt = 25
    e2 = np.arange(-2 * tt - 3, 2 * tt + 4) / (2 * tt)
    D2 = discretization_kernel(tt, e2)
    mono = True
    for _ in range(100):
        p = finite_from_masses(rng.random(e2.size - 1) ** 3)
        q = finite_from_masses(rng.random(e2.size - 1) ** 3)
        mono &= tv(D2(p), D2(q)) <= tv(p, q) + 1e-12

    reach = 0.0
    below = True
    for _ in range(10):
        m, n, J = 6, 5, 3
        K0 = rng.random((m, n)) + 1e-3
        K0 = StochasticKernel(K0 / K0.sum(1, keepdims=True), np.arange(m), np.arange(n))
        ps = [finite_from_masses(rng.random(m) + 1e-3) for _ in range(J)]
        reach = max(reach, deficiency_lp(ps, [K0(p) for p in ps]).value)
        qs = [finite_from_masses(rng.random(n) + 1e-3) for _ in range(J)]
        res = deficiency_lp(ps, qs)
        for _ in range(20):
            K = rng.random((m, n)) + 1e-3
            K = StochasticKernel(K / K.sum(1, keepdims=True), np.arange(m), np.arange(n))
            below &= res.value <= max(deficiency_upper(p, q, K) for p, q in zip(ps, qs)) + 1e-9
    criterion(10, "kernel identities", [
        ("round trip max err", rt <= 1e-12, _fmt(rt)),
        ("discretization monotone (100 pairs)", mono, mono),
        ("lp on reachable targets", reach <= 1e-9, _fmt(reach)),
        ("lp <= every kernel upper", below, below),
    ])


def test_c11_hellinger_chain(criterion):
    rng = np.random.default_rng(99)
    random_ok = True
    for _ in range(100):
        n = int(rng.integers(2, 40))
        p = finite_from_masses(rng.random(n) + 1e-6)
        q = finite_from_masses(rng.random(n) + 1e-6)
        A = rng.random(n) < 0.8
        bc = bound_check(p, q, A)
        random_ok &= bc.holds and tv(p, q) ** 2 <= hellinger(p, q) ** 2 + 1e-15

    p0 = theta0()
    law = KonnoLaw(p0)
    u = law.abs_u11
    zeta = 1e-2
    t, eta = 8192, 0.02
    edges = default_edges(t, eta, min(eta / 4, 1 / (4 * t)))
    P = finite_from_masses(np.diff(smooth_cdf(evolve(p0, t), eta)(edges)))
    Q = finite_from_masses(np.diff(law.cdf(edges)))
    A = (edges[:-1] >= -u + zeta) & (edges[1:] <= u - zeta)
    pipe = bound_check(P, Q, A)

    trimmed = 1.0 - (float(law.cdf(u - zeta)) - float(law.cdf(-u + zeta)))
    claimed = 2 ** 0.75 * math.sqrt(zeta) / math.pi
    criterion(11, "Hellinger chain", [
        ("random pairs (100)", random_ok, random_ok),
        ("pipeline chain", pipe.holds,
         f"{pipe.tv**2:.4g}<={pipe.hellinger_sq:.4g}<={pipe.upper:.4g}"),
        ("trimmed mass / 2^(3/4) sqrt(zeta)/pi", abs(trimmed / claimed - 1) <= 0.2,
         _fmt(trimmed / claimed)),
    ], info=f"trimmed mass {trimmed:.4f}; two-sided edge asymptotics give "
            f"2^(9/4) sqrt(zeta)/pi = {2 ** 2.25 * math.sqrt(zeta) / math.pi:.4f}")


def test_c12_acceleration_ordering(criterion):
    rows = []
    t0 = time.perf_counter()
    for seed in (0, 1, 2):
        r = acceleration_comparison(theta0(), epsilon=0.05, h=0.01, horizon_time=30.0,
                                    record_every=0.1, chains=20_000, seed=seed,
                                    init_halfwidth=10.0, threshold=0.1)
        rows.append((r["underdamped_time"], r["overdamped_time"],
                     r["underdamped_min_tv"], r["overdamped_min_tv"]))
    el = time.perf_counter() - t0
    ok = all(u <= o for u, o, _, _ in rows)
    criterion(12, "underdamped reaches TV<=0.1 no later than overdamped", [
        ("ordering over 3 seeds", ok, [(round(u, 2), round(o, 2)) for u, o, _, _ in rows]),
    ], info=(f"start U(-10,10), h=0.01, 20000 chains; min TV under/over = "
             f"{[(round(a, 3), round(b, 3)) for _, _, a, b in rows]}; {el:.0f}s"))
