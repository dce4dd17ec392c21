"""Parameter point of a two-state coined walk on the integer line.

A parameter point is the pair (initial coin state, coin matrix), charted by
six angles::

    a0 = exp(i s1) cos(th)          a1 = exp(i s2) sin(th)
    U  = [[ exp(i g1) cos(phi),   exp(i g2) sin(phi)],
          [ exp(-i g2) sin(phi), -exp(-i g1) cos(phi)]]

The angles are the only stored state; complex entries are derived on demand
so that unitarity can never drift.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateCoin, MarginViolation, RangeError

__all__ = [
    "ANGLE_FIELDS",
    "DEFAULT_KAPPA_MARGIN",
    "DEGENERACY_FLOOR",
    "DerivedCoefficients",
    "WalkParams",
    "build_params",
    "hadamard",
    "theta0",
    "params_from_json",
    "params_to_json",
]

ANGLE_FIELDS = ("varsigma1", "varsigma2", "vartheta", "gamma1", "gamma2", "phi")
DEFAULT_KAPPA_MARGIN = 0.05
DEGENERACY_FLOOR = 1e-9

_HALF_PI = math.pi / 2
_RANGES = {
    "varsigma1": (-_HALF_PI, _HALF_PI),
    "varsigma2": (-_HALF_PI, _HALF_PI),
    "gamma1": (-_HALF_PI, _HALF_PI),
    "gamma2": (-_HALF_PI, _HALF_PI),
    "vartheta": (0.0, _HALF_PI),
    "phi": (0.0, _HALF_PI),
}


@dataclass(frozen=True)
class DerivedCoefficients:
    """Scalars of the limit law that depend on the parameter point.

    Attributes
    ----------
    abs_u11 : float
        Modulus of the (1, 1) coin entry; the limit law lives on
        ``(-abs_u11, abs_u11)``.
    varpi : float
        Drift coefficient, in ``[-1, 1]``.
    """

    abs_u11: float
    varpi: float

    @property
    def drift_ratio(self) -> float:
        """``varpi / abs_u11``, the coefficient multiplying ``x`` in the
        drift factor of the limit density."""
        return self.varpi / self.abs_u11


@dataclass(frozen=True)
class WalkParams:
    """Validated parameter point. Build through :func:`build_params`."""

    varsigma1: float
    varsigma2: float
    vartheta: float
    gamma1: float
    gamma2: float
    phi: float
    kappa_margin: float = DEFAULT_KAPPA_MARGIN

    @property
    def angles(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in ANGLE_FIELDS)

    @property
    def a0(self) -> complex:
        return complex(np.exp(1j * self.varsigma1) * math.cos(self.vartheta))

    @property
    def a1(self) -> complex:
        return complex(np.exp(1j * self.varsigma2) * math.sin(self.vartheta))

    @property
    def coin_state(self) -> np.ndarray:
        return np.array([self.a0, self.a1], dtype=complex)

    @property
    def coin(self) -> np.ndarray:
        """The 2x2 coin matrix ``[[u11, u12], [u21, u22]]``."""
        c, s = math.cos(self.phi), math.sin(self.phi)
        e1 = np.exp(1j * self.gamma1)
        e2 = np.exp(1j * self.gamma2)
        return np.array(
            [[e1 * c, e2 * s], [np.conj(e2) * s, -np.conj(e1) * c]], dtype=complex
        )

    def derived(self) -> DerivedCoefficients:
        u = self.coin
        a0, a1 = self.a0, self.a1
        abs_u11 = abs(u[0, 0])
        cross = a0 * np.conj(a1) * u[0, 0] * np.conj(u[0, 1])
        bracket = abs(a0) ** 2 - abs(a1) ** 2 + 2.0 * cross.real / abs_u11**2
        return DerivedCoefficients(abs_u11=float(abs_u11), varpi=float(bracket * abs_u11))

    def to_dict(self) -> dict:
        return asdict(self)


def _validate(values: Mapping[str, float], kappa_margin: float) -> None:
    for name in ANGLE_FIELDS:
        v = values[name]
        lo, hi = _RANGES[name]
        if not (math.isfinite(v) and lo <= v <= hi):
            raise RangeError(name, v, lo, hi)
    if not (math.isfinite(kappa_margin) and 0.0 < kappa_margin < math.pi / 4):
        raise RangeError("kappa_margin", kappa_margin, 0.0, math.pi / 4)


def build_params(
    angles: Sequence[float] | Mapping[str, float],
    kappa_margin: float = DEFAULT_KAPPA_MARGIN,
) -> WalkParams:
    """Validate six angles and return a :class:`WalkParams`.

    Parameters
    ----------
    angles : sequence or mapping
        Either ``(varsigma1, varsigma2, vartheta, gamma1, gamma2, phi)`` or a
        mapping with those keys.
    kappa_margin : float, optional
        Minimum distance of ``phi`` from 0 and pi/2.

    Raises
    ------
    RangeError
        An angle or the margin lies outside its interval.
    DegenerateCoin
        Some coin entry has modulus below ``DEGENERACY_FLOOR``.
    MarginViolation
        ``phi`` is within ``kappa_margin`` of 0 or pi/2.
    """
    if isinstance(angles, Mapping):
        missing = [f for f in ANGLE_FIELDS if f not in angles]
        if missing:
            raise KeyError(f"missing angle fields: {missing}")
        values = {f: float(angles[f]) for f in ANGLE_FIELDS}
    else:
        seq = [float(a) for a in angles]
        if len(seq) != 6:
            raise ValueError(f"expected six angles, got {len(seq)}")
        values = dict(zip(ANGLE_FIELDS, seq))
    kappa_margin = float(kappa_margin)
    _validate(values, kappa_margin)

    p = WalkParams(**values, kappa_margin=kappa_margin)
    mods = np.abs(p.coin)
    if mods.min() < DEGENERACY_FLOOR:
        raise DegenerateCoin(f"coin entry moduli {mods.ravel().tolist()} include zero")
    phi = values["phi"]
    if not (kappa_margin <= phi <= _HALF_PI - kappa_margin):
        raise MarginViolation(
            f"phi={phi!r} outside [{kappa_margin}, {_HALF_PI - kappa_margin}]"
        )
    return p


def theta0(kappa_margin: float = DEFAULT_KAPPA_MARGIN) -> WalkParams:
    """The symmetric point: Hadamard-form coin, coin state (1, i)/sqrt(2)."""
    q = math.pi / 4
    return build_params((0.0, _HALF_PI, q, 0.0, 0.0, q), kappa_margin)


def hadamard(kappa_margin: float = DEFAULT_KAPPA_MARGIN) -> WalkParams:
    """Hadamard coin with coin state (1, 0)."""
    return build_params((0.0, 0.0, 0.0, 0.0, 0.0, math.pi / 4), kappa_margin)


def params_to_json(p: WalkParams) -> str:
    return json.dumps(p.to_dict(), sort_keys=True)


def params_from_json(text: str | Mapping) -> WalkParams:
    obj = json.loads(text) if isinstance(text, str) else dict(text)
    return build_params(obj, obj.get("kappa_margin", DEFAULT_KAPPA_MARGIN))
