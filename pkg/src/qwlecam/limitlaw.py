"""Limit laws of the rescaled walk position and their regularizations.

The rescaled position ``X_t / t`` converges to a law on ``(-u, u)`` with
``u = |u11|`` and density::

    f(x) = sqrt(1 - u^2) (1 - skew * x) / (pi (1 - x^2) sqrt(u^2 - x^2))

where ``skew = drift_sign * varpi / u``. The log-polar coordinate
``y = sign(x) log(u / |x|)`` carries it to a density ``pi(y)`` on the real
line minus the origin. Both are singular (at ``x = +-u``, resp. ``y = 0``);
the regularized versions replace the singular region by a constant plateau
of the same mass.

All integrals go through the substitution ``x = u sin(s)``, under which the
density becomes bounded and the CDF has a closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, RangeError
from .io import array_checksum
from .params import WalkParams, hadamard
from .walk import LatticeDist

__all__ = [
    "KonnoLaw",
    "RegularizedLaw",
    "TransformSpec",
    "TABLE_KNOTS",
    "kappa_eps",
    "konno_pdf",
    "lattice_projection",
    "moment",
    "pi_pdf",
    "regularize",
    "resolve_drift_sign",
    "sample",
    "transform_forward",
    "transform_inverse",
    "tv_between_laws",
]

TABLE_KNOTS = 2**16
_QUAD = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


@lru_cache(maxsize=None)
def resolve_drift_sign(t: int = 2000) -> int:
    """Orientation of the drift factor under the package's shift convention.

    Compares the mean of the limit density (drift sign +1) with the exact
    mean of the Hadamard walk with coin state (1, 0) at time ``t``; returns
    +1 when they agree in sign and -1 otherwise.
    """
    from .walk import evolve

    p = hadamard()
    walk_mean = evolve(p, t).moment(1)
    law_mean = moment(KonnoLaw(p, drift_sign=1), 1)
    if walk_mean == 0.0 or law_mean == 0.0:
        raise ArithmeticError("drift orientation is undetermined")
    return 1 if np.sign(walk_mean) == np.sign(law_mean) else -1


@dataclass(frozen=True)
class TransformSpec:
    """The map ``y -> u exp(-|y|) sign(y)`` from the line onto ``(-u, u)``."""

    abs_u11: float

    def forward(self, y):
        return transform_forward(y, self)

    def inverse(self, x):
        return transform_inverse(x, self)


def transform_forward(y, spec: TransformSpec, zero_sign: float | None = None):
    """``x = u exp(-|y|) sign(y)``.

    ``y = 0`` raises :class:`DomainError` unless ``zero_sign`` supplies the
    sign to use there.
    """
    y = np.asarray(y, dtype=float)
    sgn = np.sign(y)
    if np.any(sgn == 0):
        if zero_sign is None:
            raise DomainError("transform undefined at y = 0")
        sgn = np.where(sgn == 0, zero_sign, sgn)
    out = spec.abs_u11 * np.exp(-np.abs(y)) * sgn
    return out if out.ndim else float(out)


def transform_inverse(x, spec: TransformSpec):
    """``y = sign(x) log(u / |x|)`` for ``0 < |x| < u``."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    if np.any(ax == 0) or np.any(ax >= spec.abs_u11):
        raise DomainError("inverse transform needs 0 < |x| < |u11|")
    out = np.sign(x) * np.log(spec.abs_u11 / ax)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class KonnoLaw:
    """Limit law of the rescaled walk position.

    Parameters
    ----------
    params : WalkParams
    drift_sign : int, optional
        Orientation of the drift factor; resolved against exact evolution
        when omitted.
    """

    params: WalkParams
    drift_sign: int | None = None

    def __post_init__(self):
        if self.drift_sign is None:
            object.__setattr__(self, "drift_sign", resolve_drift_sign())
        if self.drift_sign not in (1, -1):
            raise ValueError("drift_sign must be +1 or -1")

    @cached_property
    def abs_u11(self) -> float:
        return self.params.derived().abs_u11

    @cached_property
    def skew(self) -> float:
        """Coefficient of ``x`` in the drift factor ``1 - skew * x``."""
        return self.drift_sign * self.params.derived().drift_ratio

    @property
    def spec(self) -> TransformSpec:
        return TransformSpec(self.abs_u11)

    @property
    def support(self) -> tuple[float, float]:
        return (-self.abs_u11, self.abs_u11)

    @property
    def _k(self) -> float:
        return math.sqrt(1.0 - self.abs_u11**2)

    def pdf(self, x):
        return konno_pdf(x, self)

    def pdf_s(self, s):
        """Density of ``s = arcsin(x/u)`` on ``[-pi/2, pi/2]`` (bounded)."""
        s = np.asarray(s, dtype=float)
        u, k = self.abs_u11, self._k
        sn = np.sin(s)
        return k * (1.0 - self.skew * u * sn) / (math.pi * (1.0 - (u * sn) ** 2))

    def cdf_s(self, s):
        s = np.asarray(s, dtype=float)
        u, k = self.abs_u11, self._k
        g = np.arctan2(k * np.sin(s), np.cos(s)) + self.skew * np.arctan(
            u * np.cos(s) / k
        )
        return g / math.pi + 0.5

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        u = self.abs_u11
        s = np.arcsin(np.clip(x / u, -1.0, 1.0))
        out = np.clip(self.cdf_s(s), 0.0, 1.0)
        out = np.where(x <= -u, 0.0, np.where(x >= u, 1.0, out))
        return out if out.ndim else float(out)

    def ppf(self, q):
        """Quantile function, by bracketing in ``s``."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.empty(q.shape)
        for i, qi in enumerate(q.ravel()):
            if qi <= 0.0:
                out.flat[i] = -self.abs_u11
            elif qi >= 1.0:
                out.flat[i] = self.abs_u11
            else:
                s = optimize.brentq(
                    lambda s: float(self.cdf_s(s)) - qi, -math.pi / 2, math.pi / 2,
                    xtol=1e-15, rtol=4 * np.finfo(float).eps,
                )
                out.flat[i] = self.abs_u11 * math.sin(s)
        return out

    def provenance(self) -> dict:
        return {"theta": self.params.to_dict(), "drift_sign": self.drift_sign}


def konno_pdf(x, law: KonnoLaw):
    """Limit density; 0 for ``|x| >= |u11|``.

    The singular endpoints are excluded from the support, so the returned
    value is finite everywhere; integrate through ``x = u sin(s)``.
    """
    x = np.asarray(x, dtype=float)
    u = law.abs_u11
    inside = np.abs(x) < u
    xi = np.where(inside, x, 0.0)
    val = (
        law._k
        * (1.0 - law.skew * xi)
        / (math.pi * (1.0 - xi**2) * np.sqrt((u - xi) * (u + xi)))
    )
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


def pi_pdf(y, law: KonnoLaw):
    """Density of ``y = sign(x) log(u/|x|)`` under the limit law.

    Evaluated directly in ``y`` (no pass through ``x``)::

        pi(y) = sqrt(1-u^2) e^{-|y|} (1 - skew u sign(y) e^{-|y|})
                / (pi (1 - u^2 e^{-2|y|}) sqrt(1 - e^{-2|y|}))
    """
    y = np.asarray(y, dtype=float)
    if np.any(y == 0):
        raise DomainError("pi_pdf undefined at y = 0")
    u = law.abs_u11
    a = np.abs(y)
    e = np.exp(-a)
    val = (
        law._k
        * e
        * (1.0 - law.skew * u * np.sign(y) * e)
        / (math.pi * (1.0 - u * u * e * e) * np.sqrt(-np.expm1(-2.0 * a)))
    )
    return val if val.ndim else float(val)


def _check_eps(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 0.5:
        raise RangeError("epsilon", epsilon, 0.0, 0.5)
    return epsilon


def plateau_deficit(epsilon: float, law: KonnoLaw) -> float:
    """Mass of the limit law on ``|x| > u (1 - epsilon)``."""
    a = law.abs_u11 * (1.0 - _check_eps(epsilon))
    inner = law.cdf(a) - law.cdf(-a)
    return float(1.0 - inner)


def kappa_eps(epsilon: float, law: KonnoLaw, form: str = "x") -> float:
    """Plateau height of the regularized law.

    Parameters
    ----------
    epsilon : float
        Regularization level in ``(0, 1/2)``.
    law : KonnoLaw
    form : {"x", "y"}
        ``"x"``: the deficit spread over the two end intervals of total
        width ``2 epsilon u``. ``"y"``: the same deficit spread over
        ``|y| < -log(1 - epsilon)``.
    """
    deficit = plateau_deficit(epsilon, law)
    if form == "x":
        return deficit / (2.0 * epsilon * law.abs_u11)
    if form == "y":
        return deficit / (-2.0 * math.log1p(-epsilon))
    raise ValueError("form must be 'x' or 'y'")


@dataclass(frozen=True)
class RegularizedLaw:
    """Limit law with its singular region replaced by a constant plateau.

    In ``x`` the plateau covers ``u(1-eps) < |x| < u``; in ``y`` it covers
    ``|y| < -log(1-eps)``. The two forms carry the same plateau mass.
    """

    base: KonnoLaw
    epsilon: float
    kappa_x: float = field(init=False)
    kappa_y: float = field(init=False)
    deficit: float = field(init=False)

    def __post_init__(self):
        eps = _check_eps(self.epsilon)
        d = plateau_deficit(eps, self.base)
        object.__setattr__(self, "deficit", d)
        object.__setattr__(self, "kappa_x", d / (2.0 * eps * self.base.abs_u11))
        object.__setattr__(self, "kappa_y", d / (-2.0 * math.log1p(-eps)))

    @property
    def abs_u11(self) -> float:
        return self.base.abs_u11

    @property
    def support(self) -> tuple[float, float]:
        return self.base.support

    @property
    def inner(self) -> float:
        """Half-width ``u(1-eps)`` of the unmodified region in ``x``."""
        return self.abs_u11 * (1.0 - self.epsilon)

    @property
    def y0(self) -> float:
        """Half-width ``-log(1-eps)`` of the plateau in ``y``."""
        return -math.log1p(-self.epsilon)

    # x form
    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        a, u = self.inner, self.abs_u11
        ax = np.abs(x)
        out = np.where(ax <= a, konno_pdf(x, self.base), 0.0)
        out = np.where((ax > a) & (ax < u), self.kappa_x, out)
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        a, u, k = self.inner, self.abs_u11, self.kappa_x
        F = self.base.cdf
        Fma = F(-a)
        left = k * (np.clip(x, -u, -a) + u)
        mid = F(np.clip(x, -a, a)) - Fma
        right = k * (np.clip(x, a, u) - a)
        out = np.clip(left + mid + right, 0.0, 1.0)
        out = np.where(x >= u, 1.0, out)
        return out if out.ndim else float(out)

    def pushforward_cdf(self, x):
        """CDF in ``x`` of the y-form law carried through the transform (the
        law of ``u exp(-|Y|) sign(Y)`` with ``Y`` drawn from the y-form).

        Off the plateau it agrees with the base law; on each end interval
        the carried density is ``kappa_y / |x|``.
        """
        x = np.asarray(x, dtype=float)
        u, a, ky = self.abs_u11, self.inner, self.kappa_y
        F = self.base.cdf
        half = self.deficit / 2.0
        ax = np.clip(np.abs(x), a, u)
        neg_end = ky * np.log(u / ax)
        neg_mid = half + F(np.clip(x, -a, 0.0)) - F(-a)
        below_zero = half + F(0.0) - F(-a)
        pos_mid = below_zero + F(np.clip(x, 0.0, a)) - F(0.0)
        pos_end = below_zero + F(a) - F(0.0) + ky * np.log(ax / a)
        out = np.where(
            x <= -a,
            neg_end,
            np.where(x < 0.0, neg_mid, np.where(x <= a, pos_mid, pos_end)),
        )
        out = np.where(x >= u, 1.0, np.where(x <= -u, 0.0, out))
        out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)

    def pushforward_pdf(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        on = (ax > self.inner) & (ax < self.abs_u11)
        out = np.where(on, self.kappa_y / np.where(on, ax, 1.0), konno_pdf(x, self.base))
        out = np.where(ax <= self.inner, out, np.where(on, out, 0.0))
        return out if out.ndim else float(out)

    # y form
    def pdf_y(self, y):
        y = np.asarray(y, dtype=float)
        on = np.abs(y) < self.y0
        yy = np.where(on, self.y0, y)
        out = np.where(on, self.kappa_y, pi_pdf(yy, self.base))
        return out if out.ndim else float(out)

    def cdf_y(self, y):
        y = np.asarray(y, dtype=float)
        u, y0 = self.abs_u11, self.y0
        F = self.base.cdf
        F0 = F(0.0)
        neg = F0 - F(-u * np.exp(np.minimum(y, -y0)))
        at_left = F0 - F(-u * math.exp(-y0))
        plat = at_left + self.kappa_y * (np.clip(y, -y0, y0) + y0)
        pos = F0 + 1.0 - F(u * np.exp(-np.maximum(y, y0)))
        out = np.where(y <= -y0, neg, np.where(y >= y0, pos, plat))
        out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)

    def ppf_y(self, q):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.empty(q.shape)
        for i, qi in enumerate(q.ravel()):
            lo, hi = -1.0, 1.0
            while self.cdf_y(lo) > qi:
                lo *= 2.0
            while self.cdf_y(hi) < qi:
                hi *= 2.0
            out.flat[i] = optimize.brentq(
                lambda y: float(self.cdf_y(y)) - qi, lo, hi, xtol=1e-13
            )
        return out

    def jumps(self) -> tuple[float, float]:
        """Potential increase ``-log pi(+-y0) + log kappa_y`` when leaving the
        plateau through ``+y0`` and through ``-y0``."""
        lk = math.log(self.kappa_y)
        return (
            lk - math.log(pi_pdf(self.y0, self.base)),
            lk - math.log(pi_pdf(-self.y0, self.base)),
        )

    def provenance(self) -> dict:
        d = self.base.provenance()
        d.update({"epsilon": self.epsilon, "kappa_x": self.kappa_x, "kappa_y": self.kappa_y})
        return d


def regularize(law: KonnoLaw, epsilon: float) -> RegularizedLaw:
    return RegularizedLaw(law, epsilon)


def lattice_projection(law, t: int, parity_mode: str = "sublattice") -> LatticeDist:
    """Discretize a law on ``(-u, u)`` onto sites ``k = -t..t``.

    Parameters
    ----------
    law : KonnoLaw or RegularizedLaw
        Anything with a vectorized ``cdf``.
    t : int
        Scale; site ``k`` stands for ``x = k/t``.
    parity_mode : {"full", "sublattice"}
        ``"full"``: site ``k`` receives the mass of
        ``(k/t - 1/(2t), k/t + 1/(2t)]``. ``"sublattice"``: only sites with
        ``k + t`` even receive mass, that of ``((k-1)/t, (k+1)/t]``.
    """
    t = int(t)
    if t < 1:
        raise ValueError("t must be >= 1")
    k = np.arange(-t, t + 1)
    if parity_mode == "full":
        F = law.cdf((np.arange(-t, t + 2) - 0.5) / t)
        probs = np.diff(F)
    elif parity_mode == "sublattice":
        allowed = k[::2]
        F = law.cdf(np.concatenate([allowed - 1, [allowed[-1] + 1]]) / t)
        probs = np.zeros(2 * t + 1)
        probs[::2] = np.diff(F)
    else:
        raise ValueError("parity_mode must be 'full' or 'sublattice'")
    meta = {"projection": parity_mode}
    if hasattr(law, "provenance"):
        meta.update(law.provenance())
    return LatticeDist(t, -t, probs, meta)


def _table(law) -> tuple[np.ndarray, np.ndarray]:
    s = np.linspace(-math.pi / 2, math.pi / 2, TABLE_KNOTS)
    c = np.asarray(law.cdf(law.abs_u11 * np.sin(s)), dtype=float)
    c[0], c[-1] = 0.0, 1.0
    return s, np.maximum.accumulate(c)


def sample(law, n: int, seed=None, form: str = "x") -> np.ndarray:
    """Independent draws by inverse CDF on a monotone table.

    Parameters
    ----------
    law : KonnoLaw or RegularizedLaw
    n : int
    seed : int, numpy Generator, or None
    form : {"x", "y"}
        ``"y"`` maps the draws through the inverse transform. For a
        regularized law this yields the transformed x-form law, not the
        y-form plateau law.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(
        np.random.Philox(seed)
    )
    s, c = _table(law)
    draws = law.abs_u11 * np.sin(np.interp(rng.random(n), c, s))
    if form == "y":
        draws = np.sign(draws) * np.log(law.abs_u11 / np.abs(draws))
    return draws


def table_checksum(law) -> str:
    return array_checksum(*_table(law))


def moment(law, order: int) -> float:
    """Raw moment of order 1, 2 or 4 of the x-form law."""
    if order not in (1, 2, 4):
        raise ValueError("order must be 1, 2 or 4")
    if isinstance(law, RegularizedLaw):
        base = law.base
        smax = math.asin(1.0 - law.epsilon)
        u, a = law.abs_u11, law.inner
        ends = law.kappa_x * (u ** (order + 1) - a ** (order + 1)) / (order + 1)
        ends *= 1.0 + (-1.0) ** order
    else:
        base, smax, ends = law, math.pi / 2, 0.0
    u = base.abs_u11

    def integrand(s):
        return (u * math.sin(s)) ** order * float(base.pdf_s(s))

    val, _ = integrate.quad(integrand, -smax, smax, **_QUAD)
    return float(val + ends)


def _breakpoints(law) -> list:
    if isinstance(law, RegularizedLaw):
        return [-law.inner, law.inner]
    return []


def tv_between_laws(law_a, law_b, lo: float, hi: float, n: int = 4001) -> float:
    """Total variation between two laws with CDFs, on ``[lo, hi]`` with all
    mass inside.

    The interval is split at plateau breakpoints and at every sign change of
    the density difference, located on a grid of ``n`` points uniform in
    ``arcsin`` (dense near the singular ends) and refined by root finding.
    """
    half = max(abs(lo), abs(hi))
    s = np.linspace(math.asin(lo / half), math.asin(hi / half), n)
    brk = [b for b in _breakpoints(law_a) + _breakpoints(law_b) if lo < b < hi]
    xs = np.unique(np.concatenate([half * np.sin(s), brk, [lo, hi]]))
    xs = xs[(xs >= lo) & (xs <= hi)]

    def diff(x):
        return law_a.pdf(x) - law_b.pdf(x)

    # evaluate just inside each cell so jumps at breakpoints are seen
    mid = 0.5 * (xs[:-1] + xs[1:])
    d = diff(mid)
    cuts = set(xs[[0, -1]].tolist()) | set(brk)
    for i in np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]:
        a, b = mid[i], mid[i + 1]
        if any(a < c < b for c in brk):
            continue
        try:
            cuts.add(optimize.brentq(diff, a, b, xtol=1e-15))
        except ValueError:
            cuts.add(xs[i + 1])
    cuts = np.array(sorted(cuts))
    dF = np.diff(law_a.cdf(cuts)) - np.diff(law_b.cdf(cuts))
    return float(0.5 * np.sum(np.abs(dF)))
