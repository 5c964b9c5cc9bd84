"""Macroscopicity bound of a rotor revival experiment.

A classicalizing modification with momentum-kick width ``sigma_q`` and
timescale ``tau`` reduces the planar-rotor alignment at the ``n``-th revival
to ``1/2 + exp(-n (T_rev/tau) theta(l sigma_q/hbar) (M/m_e)^2)/2``.  Demanding
that an observed visibility ratio ``f`` is still compatible fixes the largest
excluded ``tau``; its decadic logarithm in seconds is the macroscopicity.

The geometry factor is

    theta(x) = 1/2 int du u exp(-u^2/2) < [sinc(a cos(al - ph/2)) - sinc(a cos(al + ph/2))]^2 >

with ``a = u x / 2`` and the average over both angles.  The two shifted
angles are independent and uniform modulo pi, so the angle average equals
``2 (S2 - S1^2)`` with ``S1 = <sinc(a cos psi)>`` and ``S2 = <sinc^2(a cos psi)>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.polynomial.laguerre import laggauss
from scipy.optimize import minimize_scalar

from . import physcore
from .constants import AMU, HBAR, M_ELECTRON
from .errors import ConvergenceError, ValidationError

RADIAL_NODES = 64
MIN_ANGLE_NODES = 64
ANGLE_NODES_PER_X = 8
SEARCH_BRACKET = (1e-2, 1e2)
SCAN_POINTS = 161


def _sinc(y):
    return np.sinc(y / np.pi)


@lru_cache(maxsize=8)
def _radial_rule(nodes: int):
    # u e^{-u^2/2} du = e^{-s} ds with s = u^2/2
    s, w = laggauss(nodes)
    return np.sqrt(2.0 * s), w


def theta(x: float, refinement: int = 1) -> float:
    """Geometry factor of the planar-rotor classicalization rate.

    ``refinement`` multiplies both the radial and the angular node counts.
    """
    if not x >= 0:
        raise ValidationError("theta needs x >= 0")
    if x == 0:
        return 0.0
    u, w = _radial_rule(RADIAL_NODES * refinement)
    n = int(max(MIN_ANGLE_NODES, math.ceil(ANGLE_NODES_PER_X * x))) * refinement
    psi = np.arange(n) * (np.pi / n)
    s = _sinc(0.5 * x * u[:, None] * np.cos(psi)[None, :])
    spread = (s * s).mean(axis=1) - s.mean(axis=1) ** 2
    return float(np.dot(w, spread))


@dataclass(frozen=True)
class ThetaMax:
    x_star: float
    theta_m: float


@lru_cache(maxsize=4)
def theta_max(refinement: int = 1) -> ThetaMax:
    """Maximum of :func:`theta` over ``x``: log-grid scan, then bounded refinement."""
    lo, hi = SEARCH_BRACKET
    grid = np.geomspace(lo, hi, SCAN_POINTS)
    values = np.array([theta(x, refinement) for x in grid])
    i = int(np.argmax(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda lx: -theta(math.exp(lx), refinement),
                          bounds=(math.log(a), math.log(b)), method="bounded",
                          options={"xatol": 1e-8})
    if not res.success:
        raise ConvergenceError(f"theta maximization failed: {res.message}")
    x_star, best = math.exp(res.x), -res.fun
    if best < values[i]:
        x_star, best = float(grid[i]), float(values[i])
    return ThetaMax(float(x_star), float(best))


@dataclass(frozen=True)
class MacroInputs:
    """Parameters of the macroscopicity estimate (SI units)."""

    mass: float
    revival_index: int
    visibility_ratio: float
    revival_time: float
    length: float = 0.0
    sigma_q: Optional[float] = None
    tau_modification: Optional[float] = None

    def __post_init__(self):
        if not self.mass > 0:
            raise ValidationError("mass must be > 0")
        if self.revival_index < 1:
            raise ValidationError("revival index must be >= 1")
        if not 0.0 < self.visibility_ratio < 1.0:
            raise ValidationError("visibility ratio f must lie strictly between 0 and 1")
        if not self.revival_time > 0:
            raise ValidationError("revival time must be > 0")

    @classmethod
    def for_rotor(cls, spec: physcore.RotorSpec, n: int, f: float, **kwargs) -> "MacroInputs":
        return cls(spec.mass, n, f, physcore.revival_time(spec), spec.length, **kwargs)

    def with_tau(self, tau: float) -> "MacroInputs":
        return replace(self, tau_modification=tau)


def _mass_ratio_sq(inputs: MacroInputs) -> float:
    return (inputs.mass / M_ELECTRON) ** 2


def _theta_for(inputs: MacroInputs) -> float:
    if inputs.sigma_q is None:
        return theta_max().theta_m
    return theta(inputs.length * inputs.sigma_q / HBAR)


def planar_alignment_decay(inputs: MacroInputs) -> float:
    """Planar-rotor alignment at the ``n``-th revival under the modification.

    Uses ``theta(l sigma_q / hbar)`` when ``sigma_q`` is given, else ``theta_m``.
    """
    tau = inputs.tau_modification
    if tau is None:
        raise ValidationError("planar_alignment_decay needs tau_modification")
    if math.isinf(tau):
        return 1.0
    if not tau > 0:
        raise ValidationError("tau_modification must be > 0")
    exponent = inputs.revival_index * inputs.revival_time / tau * _theta_for(inputs) * _mass_ratio_sq(inputs)
    return 0.5 + 0.5 * math.exp(-exponent)


def excluded_timescale(inputs: MacroInputs) -> float:
    """Modification timescale [s] at which the revival visibility drops to ``f``."""
    rate_factor = inputs.revival_index * inputs.revival_time * _theta_for(inputs) * _mass_ratio_sq(inputs)
    return rate_factor / abs(math.log(inputs.visibility_ratio))


def mu_bound(inputs: MacroInputs) -> float:
    """``log10`` of the excluded timescale in seconds, evaluated with ``theta_m``."""
    base = replace(inputs, sigma_q=None)
    return (math.log10(inputs.revival_index) + math.log10(theta_max().theta_m)
            + 2.0 * math.log10(inputs.mass / M_ELECTRON) + math.log10(inputs.revival_time)
            - math.log10(abs(math.log(base.visibility_ratio))))


def solve_tau_for_alignment(inputs: MacroInputs, alignment: float) -> float:
    """Invert :func:`planar_alignment_decay` for the modification timescale [s]."""
    if not 0.5 < alignment < 1.0:
        raise ValidationError("alignment must lie strictly between 1/2 and 1")
    rate_factor = inputs.revival_index * inputs.revival_time * _theta_for(inputs) * _mass_ratio_sq(inputs)
    return rate_factor / -math.log(2.0 * alignment - 1.0)


def mass_kg(mass_amu: float) -> float:
    return mass_amu * AMU
