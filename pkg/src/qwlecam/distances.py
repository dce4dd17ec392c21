"""Total variation, Hellinger distance, Markov kernels and deficiency.

Distributions here are finite: a vector of probabilities with an explicit
label per entry. Two distributions are comparable only when their label
arrays are identical; :func:`align` builds such a pair explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix, csr_matrix

from .errors import DivergentLog, SizeCap, SupportMismatch
from .io import csv_text, dumps_json

__all__ = [
    "BoundCheck",
    "EmpiricalTV",
    "FiniteDist",
    "LPResult",
    "StochasticKernel",
    "LP_SIZE_CAP",
    "align",
    "as_finite",
    "bound_check",
    "deficiency_lp",
    "deficiency_upper",
    "discretization_kernel",
    "empirical_tv",
    "finite_from_masses",
    "grid_masses",
    "hellinger",
    "histogram_tv",
    "identity_kernel",
    "quantile_edges",
    "tv",
    "uniform_convolution_kernel",
]

LP_SIZE_CAP = 64
_MASS_TOL = 1e-10
_ROW_TOL = 1e-12


@dataclass(frozen=True)
class FiniteDist:
    """Probabilities on an explicitly labelled finite support."""

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support)
        p = np.asarray(self.probs, dtype=float)
        if s.shape != p.shape or p.ndim != 1:
            raise ValueError("support and probs must be 1-d of equal length")
        if np.any(p < -1e-15):
            raise ValueError("negative probability")
        if abs(p.sum() - 1.0) > _MASS_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "probs", np.clip(p, 0.0, None))

    def __len__(self) -> int:
        return self.probs.size


def as_finite(d) -> FiniteDist:
    """Accept a FiniteDist or anything with ``sites`` and ``probs``
    (e.g. a LatticeDist)."""
    if isinstance(d, FiniteDist):
        return d
    if hasattr(d, "sites") and hasattr(d, "probs"):
        return FiniteDist(np.asarray(d.sites), np.asarray(d.probs))
    raise TypeError(f"cannot interpret {type(d).__name__} as a finite distribution")


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p, q = as_finite(p), as_finite(q)
    if p.support.shape != q.support.shape or not np.array_equal(p.support, q.support):
        raise SupportMismatch("supports are not aligned; use align() first")
    return p.probs, q.probs


def align(p, q) -> tuple[FiniteDist, FiniteDist]:
    """Extend both distributions by zeros to the sorted union of supports."""
    p, q = as_finite(p), as_finite(q)
    labels = np.union1d(p.support, q.support)
    out = []
    for d in (p, q):
        v = np.zeros(labels.size)
        v[np.searchsorted(labels, d.support)] = d.probs
        out.append(FiniteDist(labels, v))
    return out[0], out[1]


def tv(p, q) -> float:
    """Half the L1 distance on an aligned support."""
    a, b = _pair(p, q)
    return float(min(1.0, 0.5 * np.abs(a - b).sum()))


def hellinger(p, q) -> float:
    """Hellinger distance ``H`` with ``H^2 = sum (sqrt(p) - sqrt(q))^2``
    (range ``[0, sqrt(2)]``)."""
    a, b = _pair(p, q)
    return float(math.sqrt(max(0.0, np.sum((np.sqrt(a) - np.sqrt(b)) ** 2))))


@dataclass(frozen=True)
class BoundCheck:
    """Terms of ``TV^2 <= H^2 <= 2 p(A^c) + E_p[1_A log(p/q)]``."""

    tv: float
    hellinger_sq: float
    outside_mass: float
    log_term: float

    @property
    def upper(self) -> float:
        return 2.0 * self.outside_mass + self.log_term

    @property
    def left_holds(self) -> bool:
        return self.tv**2 <= self.hellinger_sq + 1e-12

    @property
    def right_holds(self) -> bool:
        return self.hellinger_sq <= self.upper + 1e-12

    @property
    def holds(self) -> bool:
        return self.left_holds and self.right_holds


def bound_check(p, q, A) -> BoundCheck:
    """Evaluate both sides of the Hellinger sandwich on the set ``A``.

    Parameters
    ----------
    p, q : aligned distributions
    A : boolean array over the common support

    Raises
    ------
    DivergentLog
        ``q = 0 < p`` somewhere in ``A``.
    """
    a, b = _pair(p, q)
    A = np.asarray(A, dtype=bool)
    if A.shape != a.shape:
        raise SupportMismatch("set A must be a mask over the common support")
    if np.any(A & (a > 0) & (b <= 0)):
        raise DivergentLog("q vanishes on A where p does not")
    m = A & (a > 0)
    log_term = float(np.sum(a[m] * np.log(a[m] / b[m])))
    h = hellinger(p, q)
    return BoundCheck(tv(p, q), h * h, float(a[~A].sum()), log_term)


@dataclass(frozen=True)
class StochasticKernel:
    """Row-stochastic matrix from labelled inputs to labelled outputs."""

    matrix: np.ndarray | csr_matrix
    in_support: np.ndarray
    out_support: np.ndarray

    def __post_init__(self):
        m = self.matrix
        shape = m.shape
        ins = np.asarray(self.in_support)
        outs = np.asarray(self.out_support)
        if shape != (ins.size, outs.size):
            raise SupportMismatch("matrix shape does not match the supports")
        rows = np.asarray(m.sum(axis=1)).ravel()
        if np.any(np.abs(rows - 1.0) > _ROW_TOL):
            raise ValueError(f"row sums deviate from 1 by {np.abs(rows - 1).max():.2e}")
        vals = m.data if hasattr(m, "data") and not isinstance(m, np.ndarray) else m
        if np.any(np.asarray(vals) < 0):
            raise ValueError("negative kernel entry")
        object.__setattr__(self, "in_support", ins)
        object.__setattr__(self, "out_support", outs)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def dense(self) -> np.ndarray:
        m = self.matrix
        return m.toarray() if hasattr(m, "toarray") else np.asarray(m)

    def apply(self, p) -> FiniteDist:
        p = as_finite(p)
        if p.support.shape != self.in_support.shape or not np.array_equal(
            p.support, self.in_support
        ):
            raise SupportMismatch("distribution support differs from kernel input")
        out = np.asarray(self.matrix.T @ p.probs).ravel()
        return FiniteDist(self.out_support, out)

    __call__ = apply

    def compose(self, other: "StochasticKernel") -> "StochasticKernel":
        """``other`` after ``self``."""
        if not np.array_equal(self.out_support, other.in_support):
            raise SupportMismatch("kernels do not chain")
        m = self.matrix @ other.matrix
        return StochasticKernel(m, self.in_support, other.out_support)

    def to_json(self) -> str:
        return dumps_json(
            {
                "in_support": self.in_support,
                "out_support": self.out_support,
                "matrix": self.dense(),
            }
        )

    def to_csv(self) -> str:
        d = self.dense()
        header = ["in"] + [str(s) for s in self.out_support]
        return csv_text(header, ([s, *row] for s, row in zip(self.in_support, d)))


def identity_kernel(support) -> StochasticKernel:
    s = np.asarray(support)
    return StochasticKernel(np.eye(s.size), s, s)


def _cell_overlap(lo, hi, edges):
    """Fraction of each uniform interval ``(lo_i, hi_i]`` in each cell;
    returns a sparse matrix."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    j0 = np.maximum(np.searchsorted(edges, lo, side="right") - 1, 0)
    j1 = np.minimum(np.searchsorted(edges, hi, side="left"), edges.size - 1)
    counts = np.maximum(j1 - j0, 0)
    rows = np.repeat(np.arange(lo.size), counts)
    cols = np.repeat(j0, counts) + (np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts))
    w = np.minimum(hi[rows], edges[cols + 1]) - np.maximum(lo[rows], edges[cols])
    keep = w > 0
    rows, cols, vals = rows[keep], cols[keep], w[keep] / (hi - lo)[rows[keep]]
    m = coo_matrix((vals, (rows, cols)), shape=(lo.size, edges.size - 1)).tocsr()
    # absorb round-off so rows sum to one exactly up to the last ulp
    sums = np.asarray(m.sum(axis=1)).ravel()
    return csr_matrix(m.multiply(1.0 / sums[:, None]))


def uniform_convolution_kernel(t: int, eta: float, support, edges) -> StochasticKernel:
    """Kernel spreading site ``k`` uniformly over ``(k/t - eta, k/t + eta]``.

    Parameters
    ----------
    t : int
        Site ``k`` stands for ``x = k / t``.
    eta : float
        Half-width of the uniform spread (``1/(2t)`` spreads each site over
        its own cell).
    support : array of int
        Input sites.
    edges : array of float
        Output cell edges; must cover every spread interval.
    """
    support = np.asarray(support)
    edges = np.asarray(edges, dtype=float)
    x = support / t
    lo, hi = x - eta, x + eta
    if lo.min() < edges[0] - 1e-12 or hi.max() > edges[-1] + 1e-12:
        raise SupportMismatch("output grid does not cover the spread intervals")
    return StochasticKernel(_cell_overlap(lo, hi, edges), support, np.arange(edges.size - 1))


def discretization_kernel(t: int, edges, sites=None) -> StochasticKernel:
    """Kernel sending each cell of ``edges`` to the site ``k`` whose cell
    ``(k/t - 1/(2t), k/t + 1/(2t)]`` contains it.

    Raises
    ------
    SupportMismatch
        A cell straddles two site cells or its site is not in ``sites``.
    """
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1] * t, edges[1:] * t
    # cell (lo, hi] belongs to site k when k - 1/2 <= lo and hi <= k + 1/2
    k = np.ceil(hi - 0.5 - 1e-9).astype(np.int64)
    if np.any(lo < k - 0.5 - 1e-9):
        raise SupportMismatch("grid cells straddle lattice cells")
    if sites is None:
        sites = np.arange(k.min(), k.max() + 1)
    sites = np.asarray(sites)
    idx = np.searchsorted(sites, k)
    if np.any(idx >= sites.size) or np.any(sites[np.minimum(idx, sites.size - 1)] != k):
        raise SupportMismatch("some cells map outside the site list")
    m = coo_matrix(
        (np.ones(k.size), (np.arange(k.size), idx)), shape=(k.size, sites.size)
    ).tocsr()
    return StochasticKernel(m, np.arange(k.size), sites)


def deficiency_upper(p, q, kernel: StochasticKernel) -> float:
    """``tv(q, kernel(p))``: the deficiency of ``p`` relative to ``q``
    achieved by this particular kernel. Supports are aligned first."""
    return tv(*align(q, kernel.apply(as_finite(p))))


@dataclass
class LPResult:
    """Exact deficiency of a small instance.

    Attributes
    ----------
    value : float
        ``min_K max_j tv(q_j, K p_j)``.
    kernel : StochasticKernel
        An optimal kernel.
    dual_value : float
        Dual objective at the solver's multipliers.
    gap : float
        ``|value - dual_value|``.
    per_pair : ndarray
        ``tv(q_j, K p_j)`` at the optimum.
    """

    value: float
    kernel: StochasticKernel
    dual_value: float
    gap: float
    per_pair: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_json(self) -> str:
        return dumps_json(
            {
                "value": self.value,
                "dual_value": self.dual_value,
                "gap": self.gap,
                "per_pair": self.per_pair,
            }
        )


def deficiency_lp(
    p, q, cap: int = LP_SIZE_CAP, gap_tol: float = 1e-9
) -> LPResult:
    """Minimize ``max_j tv(q_j, K p_j)`` over row-stochastic ``K``.

    Parameters
    ----------
    p, q : distribution or sequence of distributions
        Pairs ``(p_j, q_j)`` indexed by parameter points; all ``p_j`` share
        one support and all ``q_j`` another.
    cap : int
        Maximum support size on either side.

    Raises
    ------
    SizeCap
        A support exceeds ``cap``.
    ArithmeticError
        Solver failure or duality gap above ``gap_tol``.
    """
    ps = [as_finite(x) for x in (p if isinstance(p, (list, tuple)) else [p])]
    qs = [as_finite(x) for x in (q if isinstance(q, (list, tuple)) else [q])]
    if len(ps) != len(qs):
        raise ValueError("need one q per p")
    m, n, J = len(ps[0]), len(qs[0]), len(ps)
    if m > cap or n > cap:
        raise SizeCap(f"supports {m}x{n} exceed cap {cap}")
    for d in ps:
        if not np.array_equal(d.support, ps[0].support):
            raise SupportMismatch("all p must share a support")
    for d in qs:
        if not np.array_equal(d.support, qs[0].support):
            raise SupportMismatch("all q must share a support")

    # variables: K (m*n, row-major), s (J*n), z
    nk, ns = m * n, J * n
    nv = nk + ns + 1
    c = np.zeros(nv)
    c[-1] = 1.0
    b = []
    rows_i, cols_i, vals = [], [], []
    r = 0
    for j in range(J):
        pj, qj = ps[j].probs, qs[j].probs
        for col in range(n):
            for sign in (1.0, -1.0):
                # sign * (sum_i p_i K_i,col - q_col) - s_j,col <= 0
                for i in range(m):
                    if pj[i] != 0.0:
                        rows_i.append(r)
                        cols_i.append(i * n + col)
                        vals.append(sign * pj[i])
                rows_i.append(r)
                cols_i.append(nk + j * n + col)
                vals.append(-1.0)
                b.append(sign * qj[col])
                r += 1
        for col in range(n):
            rows_i.append(r)
            cols_i.append(nk + j * n + col)
            vals.append(0.5)
        rows_i.append(r)
        cols_i.append(nv - 1)
        vals.append(-1.0)
        b.append(0.0)
        r += 1
    A_ub = coo_matrix((vals, (rows_i, cols_i)), shape=(r, nv)).tocsr()
    b_ub = np.array(b)
    eq_r = np.repeat(np.arange(m), n)
    A_eq = coo_matrix((np.ones(nk), (eq_r, np.arange(nk))), shape=(m, nv)).tocsr()
    b_eq = np.ones(m)
    bounds = [(0, None)] * (nk + ns) + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        raise ArithmeticError(f"LP solver failed: {res.message}")
    dual = float(b_ub @ res.ineqlin.marginals + b_eq @ res.eqlin.marginals)
    gap = abs(res.fun - dual)
    if gap > gap_tol:
        raise ArithmeticError(f"duality gap {gap:.3e} above {gap_tol:.1e}")
    K = np.clip(res.x[:nk].reshape(m, n), 0.0, None)
    K /= K.sum(axis=1, keepdims=True)
    kern = StochasticKernel(K, ps[0].support, qs[0].support)
    per = np.array([tv(qs[j], kern.apply(ps[j])) for j in range(J)])
    return LPResult(float(res.fun), kern, dual, gap, per)


@dataclass(frozen=True)
class EmpiricalTV:
    """Histogram TV between samples and a reference law.

    ``bias`` estimates the TV produced by sampling noise alone,
    ``(1/2) sum_i sqrt(2 q_i (1 - q_i) / (pi n))``.
    """

    tv: float
    bias: float
    edges: np.ndarray
    counts: np.ndarray
    ref_mass: np.ndarray
    n: int

    def meta(self) -> dict:
        inner = self.edges[np.isfinite(self.edges)]
        return {
            "bins": int(self.counts.size),
            "range": [float(inner[0]), float(inner[-1])],
            "n": self.n,
            "bias": self.bias,
        }


def quantile_edges(ppf, bins: int = 128, coverage: float = 0.999) -> np.ndarray:
    """``bins`` uniform bins over the central ``coverage`` quantile range,
    flanked by two overflow bins."""
    lo, hi = (float(v) for v in ppf(np.array([(1 - coverage) / 2, (1 + coverage) / 2])))
    inner = np.linspace(lo, hi, bins + 1)
    return np.concatenate([[-np.inf], inner, [np.inf]])


def histogram_tv(samples, edges, ref_cdf) -> EmpiricalTV:
    """TV between the histogram of ``samples`` and the reference masses
    ``diff(ref_cdf(edges))`` on the same bins."""
    x = np.asarray(samples, dtype=float).ravel()
    edges = np.asarray(edges, dtype=float)
    # bins are (e_i, e_{i+1}]
    idx = np.searchsorted(edges, x, side="left") - 1
    counts = np.bincount(idx, minlength=edges.size - 1)[: edges.size - 1]
    n = x.size
    F = np.asarray(ref_cdf(np.clip(edges, -1e300, 1e300)), dtype=float)
    F[0], F[-1] = 0.0, 1.0
    q = np.diff(F)
    emp = counts / n
    d = 0.5 * float(np.abs(emp - q).sum())
    bias = 0.5 * float(np.sum(np.sqrt(2.0 * q * (1.0 - q) / (math.pi * n))))
    return EmpiricalTV(d, bias, edges, counts, q, n)


def empirical_tv(samples, ppf, cdf, bins: int = 128, coverage: float = 0.999) -> EmpiricalTV:
    """Histogram TV with the fixed quantile binning of :func:`quantile_edges`."""
    return histogram_tv(samples, quantile_edges(ppf, bins, coverage), cdf)


def grid_masses(cdf, edges) -> np.ndarray:
    F = np.asarray(cdf(np.asarray(edges, dtype=float)), dtype=float)
    return np.diff(F)


def finite_from_masses(masses: Sequence[float], labels=None) -> FiniteDist:
    m = np.asarray(masses, dtype=float)
    m = np.clip(m, 0.0, None)
    m = m / m.sum()
    return FiniteDist(np.arange(m.size) if labels is None else np.asarray(labels), m)
