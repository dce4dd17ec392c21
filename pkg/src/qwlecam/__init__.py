"""Discrete-time quantum walks, their regularized limit laws, Langevin
samplers for those laws, and Le Cam-style distances between the two."""

from .params import WalkParams, build_params, hadamard, theta0
from .walk import LatticeDist, evolve, randomize, smooth_cdf, smooth_pdf
from .limitlaw import KonnoLaw, RegularizedLaw, lattice_projection, regularize
from .langevin import LangevinConfig, integrate, integrate_overdamped, integrate_underdamped
from .distances import FiniteDist, StochasticKernel, deficiency_lp, hellinger, tv

__version__ = "0.1.0"

__all__ = [
    "FiniteDist",
    "KonnoLaw",
    "LangevinConfig",
    "LatticeDist",
    "RegularizedLaw",
    "StochasticKernel",
    "WalkParams",
    "build_params",
    "deficiency_lp",
    "evolve",
    "hadamard",
    "hellinger",
    "integrate",
    "integrate_overdamped",
    "integrate_underdamped",
    "lattice_projection",
    "randomize",
    "regularize",
    "smooth_cdf",
    "smooth_pdf",
    "theta0",
    "tv",
]
