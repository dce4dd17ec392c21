"""Langevin sampling of the regularized log-polar law.

The target on the real line is ``pi_eps(y) = exp(-Psi(y))``: the log-polar
limit density outside ``|y| < y0 = -log(1 - eps)`` and a constant plateau
inside. Two dynamics share it as their invariant ``y``-marginal:

underdamped
    ``dY = V dt``, ``dV = -V dt - Psi'(Y) dt + sqrt(2) dB``
overdamped
    ``dY = -Psi'(Y) dt + sqrt(2) dB``

``Psi`` jumps at ``+-y0`` (the plateau sits roughly ``log 2`` below the
outer density). A smooth-gradient integrator cannot see that jump, so both
integrators treat the interface explicitly: the underdamped drift refracts
or reflects the momentum when it crosses ``+-y0`` (energy-conserving), and
the overdamped step accepts a plateau exit with probability
``exp(-jump)`` and reflects otherwise.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numba
import numpy as np

from .distances import EmpiricalTV, empirical_tv, histogram_tv, quantile_edges
from .errors import NonFinite, RangeError
from .io import csv_text, dumps_json
from .limitlaw import KonnoLaw, RegularizedLaw, regularize
from .params import DerivedCoefficients, WalkParams, theta0

__all__ = [
    "Ensemble",
    "LangevinConfig",
    "distance_correlation",
    "diagnostics",
    "grad_psi_eps",
    "integrate",
    "integrate_overdamped",
    "integrate_underdamped",
    "observable_Xc",
    "psi_eps",
    "time_to_tv",
    "acceleration_comparison",
    "hamiltonian_path",
]

_WALK, _QUADRATIC, _FREE = 0, 1, 2
_POTENTIALS = {"walk": _WALK, "quadratic": _QUADRATIC, "free": _FREE}
_SPLITTING, _EULER, _OVERDAMPED = 0, 1, 2
_INITS = ("plateau", "uniform")


def grad_psi_eps(y, epsilon: float, coeffs: DerivedCoefficients, drift_sign: int | None = None):
    """Derivative of ``-log pi_eps``.

    Zero on the plateau ``|y| < -log(1 - eps)``; outside::

        sign(y) [-1 + 2/(1 - u^2 e^{-2|y|}) + 1/(1 - e^{-2|y|})
                 - 1/(1 - d sign(y) e^{-|y|})]

    with ``u = |u11|`` and ``d = drift_sign * varpi``.
    """
    from .limitlaw import resolve_drift_sign

    if drift_sign is None:
        drift_sign = resolve_drift_sign()
    y = np.asarray(y, dtype=float)
    y0 = -math.log1p(-epsilon)
    a = np.abs(y)
    sg = np.where(y >= 0, 1.0, -1.0)
    e = np.exp(-np.maximum(a, y0))
    u2 = coeffs.abs_u11**2
    d = drift_sign * coeffs.varpi
    g = sg * (
        -1.0
        + 2.0 / (1.0 - u2 * e * e)
        - 1.0 / np.expm1(-2.0 * np.maximum(a, y0))
        - 1.0 / (1.0 - d * sg * e)
    )
    out = np.where(a < y0, 0.0, g)
    return out if out.ndim else float(out)


def psi_eps(y, law: RegularizedLaw):
    """``-log pi_eps(y)``."""
    return -np.log(law.pdf_y(y))


@dataclass(frozen=True)
class LangevinConfig:
    """Settings of one ensemble run.

    Attributes
    ----------
    epsilon : float
        Regularization level in ``(0, 1/2)``.
    params : WalkParams
    h : float
        Step size in ``(0, 0.1]``.
    burn_in : int
        Steps discarded before recording.
    horizon : int
        Steps after burn-in.
    thin : int
        Record every ``thin``-th step of the horizon.
    chains : int
    seed : int
    integrator : {"splitting", "euler"}
        Underdamped scheme; the overdamped dynamics always uses
        Euler-Maruyama.
    init : {"plateau", "uniform"}
        ``"plateau"``: ``Y0`` uniform on the plateau. ``"uniform"``:
        ``Y0`` uniform on ``(-init_halfwidth, init_halfwidth)``. ``V0`` is
        standard normal in both cases.
    potential : {"walk", "quadratic", "free"}
        ``"quadratic"`` (``Psi = y^2/2``) and ``"free"`` (``Psi = 0``) are
        reference potentials for testing the integrators.
    """

    epsilon: float = 0.05
    params: WalkParams = field(default_factory=theta0)
    h: float = 0.01
    burn_in: int = 100_000
    horizon: int = 100_000
    thin: int = 50
    chains: int = 64
    seed: int = 0
    integrator: str = "splitting"
    init: str = "plateau"
    init_halfwidth: float = 10.0
    potential: str = "walk"

    def __post_init__(self):
        if not 0.0 < self.epsilon < 0.5:
            raise RangeError("epsilon", self.epsilon, 0.0, 0.5)
        if not 0.0 < self.h <= 0.1:
            raise RangeError("h", self.h, 0.0, 0.1)
        if self.chains < 1:
            raise RangeError("chains", self.chains, 1, math.inf)
        if self.burn_in < 0:
            raise RangeError("burn_in", self.burn_in, 0, math.inf)
        if self.horizon < 1 or self.thin < 1:
            raise ValueError("horizon and thin must be positive")
        if self.integrator not in ("splitting", "euler"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.init not in _INITS:
            raise ValueError(f"unknown init {self.init!r}")
        if self.potential not in _POTENTIALS:
            raise ValueError(f"unknown potential {self.potential!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise RangeError("seed", self.seed, 0, 2**64 - 1)

    @property
    def retained(self) -> int:
        return self.horizon // self.thin

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        return d

    def fingerprint(self, dynamics: str = "") -> str:
        blob = json.dumps({"config": self.to_dict(), "dynamics": dynamics}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Ensemble:
    """Recorded states, shape ``(chains, retained)``.

    ``v`` is ``None`` for overdamped runs.
    """

    y: np.ndarray
    v: np.ndarray | None
    time_elapsed: float
    fingerprint: str
    config: LangevinConfig
    dynamics: str
    record_times: np.ndarray

    def __post_init__(self):
        for a in (self.y, self.v):
            if a is not None:
                a.setflags(write=False)

    @property
    def samples(self) -> np.ndarray:
        """``(n, 2)`` array of ``(y, v)`` pairs (``v`` is NaN if absent)."""
        v = self.v if self.v is not None else np.full(self.y.shape, np.nan)
        return np.column_stack([self.y.ravel(), v.ravel()])

    def to_csv(self) -> str:
        c, r = self.y.shape
        chain = np.repeat(np.arange(c), r)
        stepn = np.tile(np.round(self.record_times / self.config.h).astype(np.int64), c)
        v = self.v.ravel() if self.v is not None else np.full(c * r, np.nan)
        meta = {"fingerprint": self.fingerprint, "seed": self.config.seed, "dynamics": self.dynamics}
        return csv_text(
            ["chain", "step", "y", "v"],
            zip(chain, stepn, self.y.ravel(), v),
            comment=json.dumps(meta, sort_keys=True),
        )


@numba.njit(cache=True, nogil=True)
def _grad(kind, y, region, u2, d):
    if kind == 2:
        return 0.0
    if kind == 1:
        return y
    if region == 0:
        return 0.0
    s = 1.0 if region > 0 else -1.0
    a = abs(y)
    e = math.exp(-a)
    return s * (-1.0 + 2.0 / (1.0 - u2 * e * e) - 1.0 / math.expm1(-2.0 * a)
                - 1.0 / (1.0 - d * s * e))


@numba.njit(cache=True, nogil=True)
def _drift(kind, y, v, region, tau, y0, jump_pos, jump_neg):
    """Free flight for time ``tau`` with momentum refraction at ``+-y0``.

    ``jump_pos`` / ``jump_neg`` is the rise in potential from the plateau to
    the outer region across ``+y0`` / ``-y0``.
    """
    if kind != 0:
        return y + v * tau, v, region
    for _ in range(1000):
        if v == 0.0 or tau <= 0.0:
            return y, v, region
        if region == 0:
            b = y0 if v > 0 else -y0
            dt = (b - y) / v
            if dt >= tau:
                return y + v * tau, v, region
            tau -= dt
            side = 1 if v > 0 else -1
            rise = jump_pos if side > 0 else jump_neg
            k2 = v * v - 2.0 * rise
            y = b
            if k2 > 0.0:
                v = side * math.sqrt(k2)
                region = side
            else:
                v = -v
        else:
            b = region * y0
            if v * region >= 0.0:
                return y + v * tau, v, region
            dt = (b - y) / v
            if dt >= tau:
                return y + v * tau, v, region
            tau -= dt
            rise = jump_pos if region > 0 else jump_neg
            k2 = v * v + 2.0 * rise
            y = b
            if k2 > 0.0:
                v = -region * math.sqrt(k2)
                region = 0
            else:
                v = -v
    return y, v, region


@numba.njit(cache=True, nogil=True)
def _region_of(kind, y, y0):
    if kind != 0:
        return 0
    if y >= y0:
        return 1
    if y <= -y0:
        return -1
    return 0


@numba.njit(cache=True, nogil=True)
def _overdamped_move(kind, y, region, step, unif, y0, jump_pos, jump_neg):
    """Move from ``y`` by ``step``; plateau exits succeed with probability
    ``exp(-rise)``, otherwise the overshoot is reflected."""
    if kind != 0:
        return y + step, region
    target = y + step
    for _ in range(1000):
        if region == 0:
            if -y0 < target < y0:
                return target, 0
            side = 1 if target >= y0 else -1
            rise = jump_pos if side > 0 else jump_neg
            p = math.exp(-rise) if rise > 0.0 else 1.0
            b = side * y0
            if unif < p:
                unif = unif / p
                region = side
                y = b
            else:
                unif = (unif - p) / (1.0 - p)
                target = 2.0 * b - target
                y = b
        else:
            b = region * y0
            if target * region >= y0:
                return target, region
            rise = -(jump_pos if region > 0 else jump_neg)
            p = math.exp(-rise) if rise > 0.0 else 1.0
            if unif < p:
                unif = unif / p
                region = 0
                y = b
            else:
                unif = (unif - p) / (1.0 - p)
                target = 2.0 * b - target
                y = b
    return target, region


@numba.njit(cache=True, nogil=True)
def _run_chain(kind, scheme, gamma, h, y, v, y0, u2, d, jump_pos, jump_neg,
               normals, unifs, burn_in, thin, out_y, out_v):
    """Advance one chain; returns -1 on success or the failing step index."""
    region = _region_of(kind, y, y0)
    n_steps = normals.shape[0]
    c1 = math.exp(-gamma * h)
    c2 = math.sqrt(1.0 - c1 * c1)
    sq = math.sqrt(2.0 * h)
    k = 0
    for n in range(n_steps):
        xi = normals[n]
        if scheme == 0:
            v -= 0.5 * h * _grad(kind, y, region, u2, d)
            y, v, region = _drift(kind, y, v, region, 0.5 * h, y0, jump_pos, jump_neg)
            v = c1 * v + c2 * xi
            y, v, region = _drift(kind, y, v, region, 0.5 * h, y0, jump_pos, jump_neg)
            v -= 0.5 * h * _grad(kind, y, region, u2, d)
        elif scheme == 1:
            g = _grad(kind, y, region, u2, d)
            y, v, region = _drift(kind, y, v, region, h, y0, jump_pos, jump_neg)
            v = v - gamma * h * v - h * g + math.sqrt(2.0 * gamma * h) * xi
        else:
            g = _grad(kind, y, region, u2, d)
            y, region = _overdamped_move(kind, y, region, -h * g + sq * xi, unifs[n],
                                         y0, jump_pos, jump_neg)
        if not (math.isfinite(y) and math.isfinite(v)):
            return n
        m = n + 1 - burn_in
        if m > 0 and m % thin == 0 and k < out_y.shape[0]:
            out_y[k] = y
            out_v[k] = v
            k += 1
    return -1


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(chain)])))


def _potential_constants(config: LangevinConfig):
    from .limitlaw import resolve_drift_sign

    law = regularize(KonnoLaw(config.params), config.epsilon)
    co = config.params.derived()
    jp, jn = law.jumps()
    return law, law.y0, co.abs_u11**2, resolve_drift_sign() * co.varpi, jp, jn


def _simulate(config: LangevinConfig, scheme: int, gamma: float = 1.0,
              noise_scale: float = 1.0, init_state=None) -> Ensemble:
    kind = _POTENTIALS[config.potential]
    _, y0, u2, d, jp, jn = _potential_constants(config)
    n_steps = config.burn_in + config.horizon
    R = config.retained
    Y = np.empty((config.chains, R))
    V = np.empty((config.chains, R))
    for c in range(config.chains):
        rng = _chain_rng(config.seed, c)
        if init_state is not None:
            y, v = (float(a) for a in init_state)
        else:
            half = y0 if config.init == "plateau" else config.init_halfwidth
            y = float(rng.uniform(-half, half))
            v = float(rng.standard_normal())
        normals = rng.standard_normal(n_steps) * noise_scale
        unifs = rng.random(n_steps) if scheme == _OVERDAMPED else np.empty(0)
        if scheme == _OVERDAMPED:
            v = 0.0
        status = _run_chain(kind, scheme, gamma, config.h, y, v, y0, u2, d, jp, jn,
                            normals, unifs, config.burn_in, config.thin, Y[c], V[c])
        if status >= 0:
            raise NonFinite(c, int(status))
    times = config.h * (config.burn_in + config.thin * np.arange(1, R + 1))
    dyn = "overdamped" if scheme == _OVERDAMPED else f"underdamped-{config.integrator}"
    return Ensemble(
        y=Y,
        v=None if scheme == _OVERDAMPED else V,
        time_elapsed=config.h * n_steps,
        fingerprint=config.fingerprint(dyn),
        config=config,
        dynamics=dyn,
        record_times=times,
    )


def integrate_underdamped(config: LangevinConfig) -> Ensemble:
    """Simulate the underdamped dynamics.

    ``"splitting"``: half kick, half drift, exact velocity
    Ornstein-Uhlenbeck step ``v <- e^{-h} v + sqrt(1 - e^{-2h}) xi``, half
    drift, half kick. ``"euler"``: one explicit Euler step. Drifts refract
    the momentum at the plateau boundary. Each chain draws from its own
    Philox stream keyed by ``(seed, chain)``.

    Raises
    ------
    NonFinite
        A chain produced a non-finite state.
    """
    scheme = _SPLITTING if config.integrator == "splitting" else _EULER
    return _simulate(config, scheme)


def integrate_overdamped(config: LangevinConfig) -> Ensemble:
    """Simulate the overdamped dynamics by Euler-Maruyama with the plateau
    interface rule."""
    return _simulate(config, _OVERDAMPED)


def integrate(config: LangevinConfig, dynamics: str = "underdamped") -> Ensemble:
    if dynamics == "underdamped":
        return integrate_underdamped(config)
    if dynamics == "overdamped":
        return integrate_overdamped(config)
    raise ValueError(f"unknown dynamics {dynamics!r}")


def hamiltonian_path(config: LangevinConfig, y: float, v: float) -> Ensemble:
    """Noise-free, friction-free underdamped path (kick-drift core only);
    for integrator checks."""
    return _simulate(config, _SPLITTING if config.integrator == "splitting" else _EULER,
                     gamma=0.0, noise_scale=0.0, init_state=(y, v))


def observable_Xc(ensemble: Ensemble, t: int, params: WalkParams | None = None) -> np.ndarray:
    """``t u exp(-|y|) sign(y)`` for every recorded ``y``; ``sign(0) = +1``."""
    params = params or ensemble.config.params
    u = params.derived().abs_u11
    y = ensemble.y.ravel()
    sg = np.where(y >= 0, 1.0, -1.0)
    return t * u * np.exp(-np.abs(y)) * sg


def distance_correlation(a, b) -> float:
    """Bias-corrected distance correlation (U-centred); near 0 under
    independence, may be slightly negative."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    n = a.size
    if n < 4:
        raise ValueError("need at least 4 samples")

    def ucenter(x):
        D = np.abs(x[:, None] - x[None, :])
        rs = D.sum(axis=1)
        tot = rs.sum()
        U = D - rs[:, None] / (n - 2) - rs[None, :] / (n - 2) + tot / ((n - 1) * (n - 2))
        np.fill_diagonal(U, 0.0)
        return U

    A, B = ucenter(a), ucenter(b)
    scale = 1.0 / (n * (n - 3))
    ab = (A * B).sum() * scale
    aa = (A * A).sum() * scale
    bb = (B * B).sum() * scale
    if aa <= 0 or bb <= 0:
        return 0.0
    r2 = ab / math.sqrt(aa * bb)
    return float(math.copysign(math.sqrt(abs(r2)), r2))


def y_tv(samples, law: RegularizedLaw, bins: int = 128) -> EmpiricalTV:
    return empirical_tv(samples, law.ppf_y, law.cdf_y, bins)


def x_tv(samples, law: RegularizedLaw, bins: int = 128) -> EmpiricalTV:
    return empirical_tv(samples, _x_ppf(law), law.cdf, bins)


def _x_ppf(law: RegularizedLaw):
    from scipy.optimize import brentq

    def ppf(q):
        q = np.atleast_1d(q)
        return np.array([
            brentq(lambda x: float(law.cdf(x)) - qi, -law.abs_u11, law.abs_u11, xtol=1e-14)
            for qi in q
        ])

    return ppf


def diagnostics(ensemble: Ensemble, bins: int = 128, dcor_points: int = 2000) -> dict:
    """Stationarity summary of an ensemble.

    Keys: ``tv_y`` (histogram TV of ``y`` against the target), ``tv_y_bias``,
    ``tv_x`` (TV of ``u exp(-|y|) sign(y)`` against the x-form regularized
    law), ``v_mean``, ``v_var``, ``v_mean_se``, ``corr``, ``dcor`` (on an
    evenly thinned subsample), ``bins``, ``range_y``, ``config``.
    """
    cfg = ensemble.config
    law = regularize(KonnoLaw(cfg.params), cfg.epsilon)
    y = ensemble.y.ravel()
    ty = y_tv(y, law, bins)
    tx = x_tv(observable_Xc(ensemble, 1), law, bins)
    out = {
        "tv_y": ty.tv,
        "tv_y_bias": ty.bias,
        "tv_x": tx.tv,
        "tv_x_bias": tx.bias,
        "bins": bins,
        "range_y": ty.meta()["range"],
        "n": int(y.size),
        "dynamics": ensemble.dynamics,
        "fingerprint": ensemble.fingerprint,
        "config": cfg.to_dict(),
    }
    if ensemble.v is not None:
        v = ensemble.v.ravel()
        step = max(1, y.size // dcor_points)
        out.update(
            v_mean=float(v.mean()),
            v_var=float(v.var()),
            v_mean_se=float(v.std() / math.sqrt(v.size)),
            corr=float(np.corrcoef(y, v)[0, 1]),
            dcor=distance_correlation(y[::step], v[::step]),
        )
    return out


def diagnostics_json(ensemble: Ensemble, **kw) -> str:
    return dumps_json(diagnostics(ensemble, **kw))


def time_to_tv(ensemble: Ensemble, threshold: float = 0.1, bins: int = 128) -> tuple[float, np.ndarray]:
    """First recorded time at which the cross-chain histogram of ``y`` is
    within ``threshold`` of the target in TV; ``inf`` if never.

    Returns ``(time, tv_curve)``.
    """
    cfg = ensemble.config
    law = regularize(KonnoLaw(cfg.params), cfg.epsilon)
    edges = quantile_edges(law.ppf_y, bins)
    curve = np.array([histogram_tv(ensemble.y[:, j], edges, law.cdf_y).tv
                      for j in range(ensemble.y.shape[1])])
    hit = np.nonzero(curve <= threshold)[0]
    return (float(ensemble.record_times[hit[0]]) if hit.size else math.inf), curve


def acceleration_comparison(params: WalkParams | None = None, epsilon: float = 0.05,
                            h: float = 0.01, horizon_time: float = 30.0,
                            record_every: float = 0.1, chains: int = 20_000, seed: int = 0,
                            init_halfwidth: float = 10.0, threshold: float = 0.1) -> dict:
    """Time-to-threshold of both dynamics from the same overdispersed start
    (``Y0`` uniform on ``(-init_halfwidth, init_halfwidth)``) at equal step
    size and step budget."""
    params = params or theta0()
    steps = int(round(horizon_time / h))
    thin = max(1, int(round(record_every / h)))
    cfg = LangevinConfig(epsilon=epsilon, params=params, h=h, burn_in=0, horizon=steps,
                         thin=thin, chains=chains, seed=seed, init="uniform",
                         init_halfwidth=init_halfwidth)
    tu, cu = time_to_tv(integrate_underdamped(cfg), threshold)
    to, co = time_to_tv(integrate_overdamped(cfg), threshold)
    return {
        "underdamped_time": tu,
        "overdamped_time": to,
        "underdamped_final_tv": float(cu[-1]),
        "overdamped_final_tv": float(co[-1]),
        "underdamped_min_tv": float(cu.min()),
        "overdamped_min_tv": float(co.min()),
        "seed": seed,
        "config": cfg.to_dict(),
    }


def with_changes(config: LangevinConfig, **kw) -> LangevinConfig:
    return replace(config, **kw)
