"""Fast oscillating component of the unbiased-coin walk distribution.

For the unbiased coin the rescaled probability function is modelled as
``f(x) (1 + H(x, t))`` with::

    H(x, t) = sqrt(2) x sin(2 [omega(x) + x alpha(x)] t - beta(x))

    cos alpha = x / sqrt(1 - x^2),   cos beta = (2x - 1) / (sqrt(2) (1 - x)),
    omega = arcsin(sin(alpha) / sqrt(2)),   alpha, beta in [0, pi].

Near ``x = +-1/sqrt(2)`` the arccos forms lose all precision, so every
quantity here is computed in the angle ``sigma`` with ``x = sin(sigma)/sqrt(2)``::

    alpha = atan2(sqrt(2) cos(sigma), sin(sigma))
    omega = atan(cos(sigma))
    beta  = atan2(cos(sigma), sqrt(2) sin(sigma) - 1)

which are smooth on the closed interval. Node finding, quadrature and node
residuals all work in ``sigma``.

Exact simulation at the symmetric point does not follow ``H``: the walk
oscillates as ``f(x) (1 - 2 x^2 sin(2 t [x alpha - omega]))`` up to
``O(1/t)``, i.e. with the square of the stated envelope and the
stationary-phase sign of ``omega``. :func:`decomposition_residual` can test
either model; the node and integral functionals keep ``H`` as stated.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DomainError, UnsupportedBias
from .io import csv_text, dumps_json
from .params import WalkParams, theta0

__all__ = [
    "EXPLICIT_CONSTANT",
    "EQUIDISTRIBUTION_HEURISTIC",
    "STATIONARY_PHASE_TV",
    "PHASE_OFFSETS",
    "DecompositionResult",
    "Nodes",
    "OscillationReport",
    "PhasePoint",
    "H_sigma",
    "H_value",
    "abs_H_integral",
    "calibrate_phase_offset",
    "critical_points",
    "decomposition_residual",
    "f_weighted_integral",
    "lower_bound_chain",
    "oscillation_nodes",
    "phase",
    "phase_point",
    "phase_sigma",
    "walk_phase_sigma",
    "plateau_tv",
    "envelope_ratio",
    "telescoping_sum",
    "triangle_sum",
    "H_trace_csv",
]

X_MAX = 1.0 / math.sqrt(2.0)
EXPLICIT_CONSTANT = 1.0 / (8.0 * math.sqrt(2.0) * math.pi)
EQUIDISTRIBUTION_HEURISTIC = 1.0 / (math.sqrt(2.0) * math.pi)
# (1/2) int f(x) 2 x^2 (2/pi) dx at the symmetric point
STATIONARY_PHASE_TV = 2.0 * (1.0 - 1.0 / math.sqrt(2.0)) / math.pi
PHASE_OFFSETS = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)
_SQ2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PhasePoint:
    x: float
    alpha_x: float
    beta_x: float
    omega_alpha: float


def _sigma_of_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= X_MAX):
        raise DomainError("need |x| < 1/sqrt(2)")
    return np.arcsin(_SQ2 * x)


def _angles(sigma):
    s, c = np.sin(sigma), np.cos(sigma)
    alpha = np.arctan2(_SQ2 * c, s)
    omega = np.arctan(c)
    beta = np.arctan2(c, _SQ2 * s - 1.0)
    return alpha, beta, omega


def phase_point(x: float) -> PhasePoint:
    sigma = _sigma_of_x(x)
    a, b, o = _angles(sigma)
    return PhasePoint(float(x), float(a), float(b), float(o))


def phase_sigma(sigma, t):
    """``2 [omega + x alpha] t - beta`` as a function of ``sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    alpha, beta, omega = _angles(sigma)
    x = np.sin(sigma) / _SQ2
    return 2.0 * t * (omega + x * alpha) - beta


def walk_phase_sigma(sigma, t):
    """Stationary-phase walk phase ``2 t [x alpha - omega]`` in ``sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    alpha, _, omega = _angles(sigma)
    x = np.sin(sigma) / _SQ2
    return 2.0 * t * (x * alpha - omega)


def _dphase_sigma(sigma, t):
    # d/dsigma of omega + x alpha is -2 sin/(1+cos^2) + cos alpha / sqrt(2);
    # d beta / d sigma is -1/(sqrt(2) - sin)
    s, c = np.sin(sigma), np.cos(sigma)
    alpha = np.arctan2(_SQ2 * c, s)
    dg = -2.0 * s / (1.0 + c * c) + c * alpha / _SQ2
    return 2.0 * t * dg + 1.0 / (_SQ2 - s)


def phase(x, t):
    return phase_sigma(_sigma_of_x(x), t)


def H_sigma(sigma, t):
    """``H`` evaluated through ``sigma`` (where ``sqrt(2) x = sin(sigma)``)."""
    sigma = np.asarray(sigma, dtype=float)
    return np.sin(sigma) * np.sin(phase_sigma(sigma, t))


def H_value(x, t):
    """Oscillation term ``sqrt(2) x sin(phase(x, t))`` for ``|x| < 1/sqrt(2)``."""
    out = H_sigma(_sigma_of_x(x), t)
    return out if np.ndim(out) else float(out)


def _bisect(f, lo, hi, target, increasing, tol=1e-12, max_iter=200):
    """Vectorized bisection for ``f(s) = target`` on brackets ``[lo, hi]``.

    Runs to floating-point resolution; ``tol`` is the width that must be
    reached for the result to be accepted.
    """
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        above = f(mid) > target
        go_left = above == increasing
        hi = np.where(go_left, mid, hi)
        lo = np.where(go_left, lo, mid)
    width = hi - lo
    if np.any(width > max(tol, 4 * np.finfo(float).eps)):
        raise ConvergenceError(f"bracket width {width.max():.3e} above {tol:.1e}")
    return 0.5 * (lo + hi)


def critical_points(t: int, n_grid: int = 4097) -> np.ndarray:
    """Interior zeros of the phase derivative in ``sigma``."""
    from scipy.optimize import brentq

    s = np.linspace(-math.pi / 2, math.pi / 2, n_grid)
    d = _dphase_sigma(s, t)
    out = []
    for i in np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]:
        out.append(brentq(_dphase_sigma, s[i], s[i + 1], args=(t,), xtol=1e-15))
    return np.array(out)


@dataclass(frozen=True)
class Nodes:
    """Zeros of the oscillating sine and the midphase points between them.

    Attributes
    ----------
    sigma, x : ndarray
        Node locations, increasing.
    ell : ndarray
        Integer ``l`` with phase equal to ``pi l``.
    piece : ndarray
        Index of the monotone phase piece holding each node.
    mid_sigma, mid_x : ndarray
        Points with phase ``pi (l + 1/2)`` between consecutive nodes of the
        same piece.
    mid_left, mid_right : ndarray
        Indices into the node arrays of the bracketing nodes.
    """

    t: int
    sigma: np.ndarray
    x: np.ndarray
    ell: np.ndarray
    piece: np.ndarray
    mid_sigma: np.ndarray
    mid_x: np.ndarray
    mid_left: np.ndarray
    mid_right: np.ndarray
    breakpoints: np.ndarray

    @property
    def count(self) -> int:
        return int(self.x.size)


def _solve_on_piece(t, a, b, levels):
    pa, pb = phase_sigma(a, t), phase_sigma(b, t)
    inc = pb > pa
    lo = np.full(levels.size, a)
    hi = np.full(levels.size, b)
    return _bisect(lambda s: phase_sigma(s, t), lo, hi, levels, inc)


@lru_cache(maxsize=16)
def oscillation_nodes(t: int) -> Nodes:
    """All ``x`` in ``(-1/sqrt(2), 1/sqrt(2))`` where the phase is a multiple
    of ``pi``, found by bisection on each monotone piece of the phase."""
    if t < 1:
        raise ValueError("t must be >= 1")
    crit = critical_points(t)
    bps = np.concatenate([[-math.pi / 2], crit, [math.pi / 2]])
    sig, ell, piece = [], [], []
    msig, mleft, mright = [], [], []
    for j in range(bps.size - 1):
        a, b = bps[j], bps[j + 1]
        pa, pb = float(phase_sigma(a, t)), float(phase_sigma(b, t))
        lo_v, hi_v = min(pa, pb), max(pa, pb)
        ls = np.arange(math.floor(lo_v / math.pi) + 1, math.ceil(hi_v / math.pi))
        ls = ls[(ls * math.pi > lo_v) & (ls * math.pi < hi_v)]
        if pb < pa:
            ls = ls[::-1]
        roots = _solve_on_piece(t, a, b, ls * math.pi) if ls.size else np.empty(0)
        base = len(sig)
        sig.extend(roots.tolist())
        ell.extend(ls.tolist())
        piece.extend([j] * ls.size)
        if ls.size > 1:
            mids_l = np.minimum(ls[:-1], ls[1:]) + 0.5
            mroots = _solve_on_piece(t, a, b, mids_l * math.pi)
            msig.extend(mroots.tolist())
            mleft.extend(range(base, base + ls.size - 1))
            mright.extend(range(base + 1, base + ls.size))
    sig = np.array(sig)
    msig = np.array(msig)
    return Nodes(
        t=t,
        sigma=sig,
        x=np.sin(sig) / _SQ2,
        ell=np.array(ell, dtype=np.int64),
        piece=np.array(piece, dtype=np.int64),
        mid_sigma=msig,
        mid_x=np.sin(msig) / _SQ2,
        mid_left=np.array(mleft, dtype=np.int64),
        mid_right=np.array(mright, dtype=np.int64),
        breakpoints=bps,
    )


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def _piecewise_integral(t: int, weight) -> float:
    """Integral over ``sigma`` of ``|sin(sigma) sin(phase)| * weight(sigma)``,
    split at every sign change so each piece is smooth."""
    nodes = oscillation_nodes(t)
    cuts = np.unique(
        np.concatenate([nodes.breakpoints, nodes.sigma, [0.0]])
    )
    a, b = cuts[:-1], cuts[1:]
    half = 0.5 * (b - a)
    s = (0.5 * (a + b))[:, None] + half[:, None] * _GL_X[None, :]
    vals = np.abs(np.sin(s) * np.sin(phase_sigma(s, t))) * weight(s)
    return float(np.sum(half * (vals @ _GL_W)))


def abs_H_integral(t: int) -> float:
    """``int |H(x, t)| dx`` over ``(-1/sqrt(2), 1/sqrt(2))``."""
    return _piecewise_integral(t, lambda s: np.cos(s) / _SQ2)


def f_weighted_integral(t: int) -> float:
    """``int f(x) |H(x, t)| dx`` with ``f`` the unbiased symmetric limit
    density ``1 / (pi (1 - x^2) sqrt(1 - 2 x^2))``; in ``sigma`` the
    weight ``f dx`` is ``1 / (sqrt(2) pi (1 - sin^2/2))``."""
    return _piecewise_integral(
        t, lambda s: 1.0 / (_SQ2 * math.pi * (1.0 - 0.5 * np.sin(s) ** 2))
    )


def triangle_sum(t: int) -> float:
    """``sum |xi_l| (x_{l+1} - x_l) / 4`` over consecutive nodes of one
    monotone piece, ``xi_l`` the midphase point between them."""
    n = oscillation_nodes(t)
    dx = np.abs(n.x[n.mid_right] - n.x[n.mid_left])
    return float(np.sum(np.abs(n.mid_x) * dx) / 4.0)


def telescoping_sum(t: int) -> float:
    """``sum (x_{l+1}^2 - x_l^2) / 8`` over consecutive positive nodes."""
    x = np.sort(oscillation_nodes(t).x)
    x = x[x > 0]
    return float(np.sum(np.diff(x**2)) / 8.0)


def _require_unbiased(params: WalkParams) -> None:
    if abs(params.phi - math.pi / 4) > 1e-12:
        raise UnsupportedBias(f"phi={params.phi!r}; only phi = pi/4 is supported")


@dataclass(frozen=True)
class DecompositionResult:
    x: np.ndarray
    sites: np.ndarray
    residual: np.ndarray
    rms: float
    offset: float


def _nearest_allowed(x, t):
    return (2 * np.round((np.asarray(x) * t + t) / 2.0) - t).astype(np.int64)


MODELS = ("stated", "stationary")


def _oscillation_model(xs, t, offset, model):
    sig = np.arcsin(_SQ2 * xs)
    if model == "stated":
        return np.sin(sig) * np.sin(phase_sigma(sig, t) + offset)
    if model == "stationary":
        return 2.0 * xs**2 * np.sin(walk_phase_sigma(sig, t) + offset)
    raise ValueError(f"model must be one of {MODELS}")


def _residual(dist, law, x_grid, offset, model="stated"):
    t = dist.t
    k = _nearest_allowed(x_grid, t)
    xk = k / t
    inside = np.abs(xk) < X_MAX
    xs = np.where(inside, xk, 0.0)
    Ht = _oscillation_model(xs, t, offset, model)
    model_p = law.pdf(xk) * (1.0 + np.where(inside, Ht, 0.0))
    return k, t * dist.prob_at(k) / 2.0 - model_p


@lru_cache(maxsize=16)
def calibrate_phase_offset(params: WalkParams, t: int = 1024, n_grid: int = 241,
                           model: str = "stated"):
    """Offset in ``PHASE_OFFSETS`` minimizing the RMS residual at time ``t``
    on ``|x| <= 0.6``. Returns ``(offset, {offset: rms})``."""
    from .limitlaw import KonnoLaw
    from .walk import evolve

    _require_unbiased(params)
    dist = evolve(params, t)
    law = KonnoLaw(params)
    grid = np.linspace(-0.6, 0.6, n_grid)
    scores = {}
    for off in PHASE_OFFSETS:
        _, r = _residual(dist, law, grid, off, model)
        scores[off] = float(np.sqrt(np.mean(r**2)))
    best = min(scores, key=scores.get)
    return best, scores


def decomposition_residual(
    params: WalkParams, t: int, x_grid, phase_offset: float | None = None,
    model: str = "stated",
) -> DecompositionResult:
    """Residual ``t p(k, t) / 2 - f(k/t) (1 + h(k/t, t))`` where ``k`` is the
    parity-allowed site nearest ``t x``.

    ``model="stated"`` uses ``h = H`` with its phase shifted by the
    calibrated offset; ``model="stationary"`` uses
    ``h = 2 x^2 sin(2 t [x alpha - omega] + offset)``.

    Raises
    ------
    UnsupportedBias
        The coin is not the unbiased ``phi = pi/4`` coin.
    """
    from .limitlaw import KonnoLaw
    from .walk import evolve

    _require_unbiased(params)
    if phase_offset is None:
        phase_offset, _ = calibrate_phase_offset(params, model=model)
    x_grid = np.asarray(x_grid, dtype=float)
    dist = evolve(params, t)
    k, r = _residual(dist, KonnoLaw(params), x_grid, phase_offset, model)
    return DecompositionResult(x_grid, k, r, float(np.sqrt(np.mean(r**2))), phase_offset)


def envelope_ratio(params: WalkParams, t: int, x_grid) -> np.ndarray:
    """``(t p(k, t) / 2) / f(k/t) - 1`` at the parity-allowed sites nearest
    ``t x``: the measured relative oscillation around the limit density."""
    from .limitlaw import KonnoLaw
    from .walk import evolve

    dist = evolve(params, t)
    k = _nearest_allowed(np.asarray(x_grid, dtype=float), t)
    return t * dist.prob_at(k) / 2.0 / KonnoLaw(params).pdf(k / t) - 1.0


def plateau_tv(t: int, params: WalkParams | None = None) -> float:
    """``TV(walk law at t, sublattice projection of the limit law)``."""
    from .distances import tv
    from .limitlaw import KonnoLaw, lattice_projection
    from .walk import evolve

    params = params or theta0()
    p = evolve(params, t)
    q = lattice_projection(KonnoLaw(params), t, "sublattice")
    return tv(p, q)


@dataclass
class OscillationReport:
    t: int
    abs_H_integral: float
    f_weighted_integral: float
    lower_bound_chain: dict
    nodes: np.ndarray = field(repr=False)
    midphase: np.ndarray = field(repr=False)

    def to_json(self) -> str:
        d = asdict(self)
        d["nodes"] = self.nodes.tolist()
        d["midphase"] = self.midphase.tolist()
        return dumps_json(d)


def lower_bound_chain(t: int, with_plateau: bool = True) -> OscillationReport:
    """The oscillation functionals side by side.

    ``lower_bound_chain`` holds:

    - ``abs_H_bound``: ``int |H| dx / (2 pi)``
    - ``triangle_sum``: ``sum |xi_l| dx_l / 4``
    - ``explicit_constant``: ``1 / (8 sqrt(2) pi)``
    - ``tv_plateau``: walk law vs sublattice projection of the limit law
      (omitted when ``with_plateau`` is false)
    - ``equidistribution_heuristic``: ``1 / (sqrt(2) pi)``
    - ``half_f_weighted``: ``int f |H| dx / 2``
    - ``stationary_phase_tv``: ``2 (1 - 1/sqrt(2)) / pi``, the plateau
      predicted by the ``2 x^2`` envelope with ``|sin|`` averaging ``2/pi``
    """
    if t < 100:
        raise ValueError("t must be >= 100")
    ah = abs_H_integral(t)
    fw = f_weighted_integral(t)
    n = oscillation_nodes(t)
    chain = {
        "abs_H_bound": ah / (2.0 * math.pi),
        "triangle_sum": triangle_sum(t),
        "explicit_constant": EXPLICIT_CONSTANT,
        "equidistribution_heuristic": EQUIDISTRIBUTION_HEURISTIC,
        "half_f_weighted": 0.5 * fw,
        "node_count": n.count,
        "stationary_phase_tv": STATIONARY_PHASE_TV,
    }
    if with_plateau:
        chain["tv_plateau"] = plateau_tv(t)
    return OscillationReport(t, ah, fw, chain, n.x.copy(), n.mid_x.copy())


def H_trace_csv(t: int, x) -> str:
    x = np.asarray(x, dtype=float)
    return csv_text(["x", "H"], zip(x, H_value(x, t)), comment=json.dumps({"t": t}))
