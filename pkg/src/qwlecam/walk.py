"""Exact evolution of the coined walk and its two randomizations.

One step mixes the coin at every site,
``(b, beta) <- (u11 b + u12 beta, u21 b + u22 beta)``, then moves the
coin-0 component one site right and the coin-1 component one site left.
The walk starts at the origin with coin state ``(a0, a1)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CapExceeded, GridTooCoarse, NormDrift
from .grids import DensityGrid
from .io import array_checksum, csv_text, read_csv
from .params import WalkParams, build_params

__all__ = [
    "DEFAULT_CAP",
    "LatticeDist",
    "RandomizedDist",
    "WalkState",
    "default_edges",
    "evolve",
    "init_state",
    "params_of",
    "randomize",
    "smooth_cdf",
    "smooth_pdf",
    "step",
    "window_radius",
]

DEFAULT_CAP = 2**20
_NORM_TOL = 1e-8


@dataclass(frozen=True)
class WalkState:
    """Amplitudes at time ``t`` on sites ``-t..t``.

    ``amplitudes[k + t] = (b_k, beta_k)``: coin-0 and coin-1 amplitude at
    site ``k``.
    """

    t: int
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.t, self.t + 1)

    def probabilities(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)


def init_state(params: WalkParams) -> WalkState:
    amp = np.zeros((1, 2), dtype=complex)
    amp[0] = params.coin_state
    return WalkState(0, amp)


def step(state: WalkState, params: WalkParams) -> WalkState:
    """Advance one step on the full lattice."""
    u = params.coin
    b, beta = state.amplitudes[:, 0], state.amplitudes[:, 1]
    mixed_b = u[0, 0] * b + u[0, 1] * beta
    mixed_beta = u[1, 0] * b + u[1, 1] * beta
    t = state.t + 1
    out = np.zeros((2 * t + 1, 2), dtype=complex)
    # old site k sits at index k + t - 1; it moves to k + 1 (index k + t + 1)
    # or k - 1 (index k + t - 1)
    out[2:, 0] = mixed_b
    out[:-2, 1] = mixed_beta
    return WalkState(t, out)


@dataclass(frozen=True)
class LatticeDist:
    """Probability function on consecutive integer sites.

    Attributes
    ----------
    t : int
        Walk time; the natural scale is ``x = k / t``.
    support_offset : int
        Site label of ``probs[0]``.
    probs : ndarray
        Probabilities (read-only).
    meta : dict
        Provenance (parameters, construction).
    """

    t: int
    support_offset: int
    probs: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.support_offset, self.support_offset + self.probs.size)

    @property
    def x(self) -> np.ndarray:
        """Sites on the rescaled axis ``k / t``."""
        return self.sites / self.t

    def prob_at(self, k) -> np.ndarray:
        k = np.asarray(k)
        i = k - self.support_offset
        ok = (i >= 0) & (i < self.probs.size)
        out = np.zeros(k.shape)
        out[ok] = self.probs[i[ok]]
        return out

    def as_dict(self) -> dict[int, float]:
        return {int(k): float(p) for k, p in zip(self.sites, self.probs) if p != 0.0}

    def total_mass(self) -> float:
        return float(self.probs.sum())

    def moment(self, order: int, scaled: bool = True) -> float:
        x = self.x if scaled else self.sites.astype(float)
        return float(np.sum(self.probs * x**order))

    def checksum(self) -> str:
        return array_checksum(self.sites, self.probs)

    def header(self) -> dict:
        h = {"t": self.t, "checksum": self.checksum()}
        h.update(self.meta)
        return h

    def to_csv(self) -> str:
        return csv_text(
            ["k", "prob"],
            zip(self.sites, self.probs),
            comment=json.dumps(self.header(), sort_keys=True),
        )

    @classmethod
    def from_csv(cls, path) -> "LatticeDist":
        meta, cols, rows = read_csv(path)
        if cols[:2] != ["k", "prob"]:
            raise ValueError(f"unexpected columns {cols}")
        ks = np.array([int(r[0]) for r in rows])
        ps = np.array([float(r[1]) for r in rows])
        if ks.size and np.any(np.diff(ks) != 1):
            raise ValueError("sites must be consecutive")
        extra = {k: v for k, v in (meta or {}).items() if k not in ("t", "checksum")}
        d = cls(int(meta["t"]), int(ks[0]) if ks.size else 0, ps, extra)
        if meta.get("checksum") not in (None, d.checksum()):
            raise ValueError("checksum mismatch")
        return d


@dataclass(frozen=True)
class RandomizedDist(LatticeDist):
    """Walk outcome plus an independent uniform integer offset in
    ``[-r, r - 1]``."""

    eta: float = 0.0
    r: int = 0

    def header(self) -> dict:
        h = super().header()
        h.update({"eta": self.eta, "r": self.r})
        return h


@lru_cache(maxsize=8)
def _evolve_probs(params: WalkParams, t: int) -> np.ndarray:
    # amplitudes live on the parity sublattice k = -s, -s+2, ..., s
    # (index j <-> k = -s + 2j); a step maps b[j] -> j+1 and beta[j] -> j.
    u = params.coin
    u11, u12, u21, u22 = u[0, 0], u[0, 1], u[1, 0], u[1, 1]
    b = np.zeros(t + 1, dtype=complex)
    c = np.zeros(t + 1, dtype=complex)
    nb = np.zeros(t + 1, dtype=complex)
    nc = np.zeros(t + 1, dtype=complex)
    b[0], c[0] = params.a0, params.a1
    for s in range(t):
        bs, cs = b[: s + 1], c[: s + 1]
        nb[0] = 0.0
        np.multiply(u11, bs, out=nb[1 : s + 2])
        nb[1 : s + 2] += u12 * cs
        np.multiply(u21, bs, out=nc[: s + 1])
        nc[: s + 1] += u22 * cs
        nc[s + 1] = 0.0
        b, nb = nb, b
        c, nc = nc, c
    sub = b.real**2 + b.imag**2 + c.real**2 + c.imag**2
    full = np.zeros(2 * t + 1)
    full[::2] = sub
    full.setflags(write=False)
    return full


def evolve(params: WalkParams, t: int, cap: int = DEFAULT_CAP) -> LatticeDist:
    """Exact distribution of the walk position after ``t`` steps.

    Parameters
    ----------
    params : WalkParams
    t : int
        Number of steps, ``0 <= t <= cap``.
    cap : int, optional
        Largest admissible ``t``.

    Returns
    -------
    LatticeDist
        Full lattice ``-t..t`` with explicit zeros on sites of the wrong
        parity.

    Raises
    ------
    CapExceeded
        ``t > cap``.
    NormDrift
        Total probability moved away from one by more than round-off.
    """
    t = int(t)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t > cap:
        raise CapExceeded(f"t={t} exceeds cap {cap}")
    probs = _evolve_probs(params, t)
    drift = abs(1.0 - probs.sum())
    if drift > _NORM_TOL:
        raise NormDrift(f"norm drift {drift:.3e} at t={t}")
    return LatticeDist(t, -t, probs, {"theta": params.to_dict()})


def window_radius(eta: float, t: int) -> int:
    """Half-width ``r`` of the integer randomization window (floor rule)."""
    return int(math.floor(eta * t))


def randomize(dist: LatticeDist, eta: float) -> RandomizedDist:
    """Average the probability function over windows of ``2r`` sites.

    The value at site ``y`` is ``(1/(2r)) sum_{k=y-r}^{y+r-1} p(k)`` with
    ``r = floor(eta t)``. When ``r < 1`` the input is returned unchanged.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    r = window_radius(eta, dist.t)
    meta = dict(dist.meta)
    if r < 1:
        return RandomizedDist(dist.t, dist.support_offset, dist.probs, meta, eta, 0)
    p = dist.probs
    n = p.size
    pad = np.concatenate([np.zeros(2 * r), p, np.zeros(2 * r - 1)])
    c = np.concatenate([[0.0], np.cumsum(pad)])
    # out[m] sums p[m - 2r + 1 .. m], i.e. pad[m + 1 .. m + 2r]
    out = (c[2 * r + 1 : n + 4 * r] - c[1 : n + 2 * r]) / (2 * r)
    out[out < 0.0] = 0.0
    return RandomizedDist(dist.t, dist.support_offset - r + 1, out, meta, eta, r)


def _ramp(dist: LatticeDist):
    x = dist.x
    p = dist.probs
    cp = np.cumsum(p)
    cm = np.cumsum(p * x)

    def ramp(z):
        # sum_k p_k (z - x_k)_+
        i = np.searchsorted(x, z, side="right") - 1
        out = np.zeros(np.shape(z))
        ok = i >= 0
        out[ok] = cp[i[ok]] * z[ok] - cm[i[ok]]
        return out

    return ramp


def smooth_cdf(dist: LatticeDist, eta: float):
    """CDF of ``k/t + U`` with ``U`` uniform on ``(-eta, eta]``, as a
    vectorized callable."""
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    ramp = _ramp(dist)

    def cdf(z):
        z = np.asarray(z, dtype=float)
        return (ramp(z + eta) - ramp(z - eta)) / (2.0 * eta)

    return cdf


def default_edges(t: int, eta: float, width: float) -> np.ndarray:
    """Cell edges ``j * width`` covering ``[-1 - eta, 1 + eta]``."""
    n = int(math.ceil((1.0 + eta) / width - 1e-9))
    return np.arange(-n, n + 1) * width


def smooth_pdf(
    dist: LatticeDist,
    eta: float,
    width: float | None = None,
    edges=None,
) -> DensityGrid:
    """Exact cell averages of the walk law (scale ``x = k/t``) convolved with
    the uniform law on ``(-eta, eta]``.

    Parameters
    ----------
    dist : LatticeDist
    eta : float
        Smoothing half-width in ``(0, 1)``.
    width : float, optional
        Cell width of the default grid; defaults to ``min(eta/4, 1/(4t))``.
    edges : array_like, optional
        Explicit cell edges; must cover ``[-1, 1]``.

    Raises
    ------
    GridTooCoarse
        Some cell is wider than ``eta / 4``.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    if edges is None:
        if width is None:
            width = min(eta / 4.0, 1.0 / (4.0 * max(dist.t, 1)))
        edges = default_edges(dist.t, eta, width)
    edges = np.asarray(edges, dtype=float)
    if edges[0] > -1.0 or edges[-1] < 1.0:
        raise ValueError("grid must cover [-1, 1]")
    if np.max(np.diff(edges)) > eta / 4.0 * (1 + 1e-12):
        raise GridTooCoarse(
            f"cell width {np.max(np.diff(edges)):.3g} exceeds eta/4 = {eta / 4:.3g}"
        )
    F = smooth_cdf(dist, eta)(edges)
    return DensityGrid.from_masses(edges, np.diff(F))


def params_of(dist: LatticeDist) -> WalkParams:
    """Recover the parameter point recorded in a distribution's metadata."""
    return build_params(dist.meta["theta"], dist.meta["theta"]["kappa_margin"])
