"""Free evolution of the alignment signal, decoherence and classical baselines.

Time is measured in revival periods, ``tau = t / T_rev``.  A coherence
between ``j`` and ``j+2`` picks up the phase ``exp(i pi tau (4j + 6))``, so
the unitary signal is the cosine series

    A(tau) = D + sum_j w_j cos(pi tau (4j + 6))

with ``D`` the diagonal (time-independent) part and ``w_j`` the summed
``dj = 2`` band weighted by the ``cos^2`` matrix elements.  Phases are
reduced modulo ``2 pi`` using the fractional part of ``tau`` so integer
revivals are reproduced exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import physcore
from .decorates import EnvironmentSpec, decoherence_rate
from .errors import NanorevivalError, ValidationError
from .rotorstate import BandedDensity, ThermalRotorState
from .specfun import cos2_diag, cos2_offdiag

BOUND_TOLERANCE = 1e-10
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class AlignmentSeries:
    """Cosine-series form of the unitary alignment signal."""

    diagonal: float
    weights: np.ndarray  # w_j for the (j, j+2) coherence, j = 0..j_max-2

    @property
    def frequencies(self) -> np.ndarray:
        return 4.0 * np.arange(self.weights.size) + 6.0

    def __call__(self, tau) -> np.ndarray:
        return _evaluate(self, tau)


def _band(state) -> BandedDensity:
    if isinstance(state, ThermalRotorState):
        return state.band
    if isinstance(state, BandedDensity):
        return state
    if isinstance(state, AlignmentSeries):
        raise TypeError("already an AlignmentSeries")
    raise TypeError(f"expected a thermal state or banded density, got {type(state).__name__}")


def alignment_series(state) -> AlignmentSeries:
    """Collapse the ``m`` sum of the band into per-``j`` weights."""
    if isinstance(state, AlignmentSeries):
        return state
    band = _band(state)
    mult = band.multiplicity()[:, None]
    m = np.arange(band.diag.shape[0], dtype=float)[:, None]
    j = np.arange(band.j_max + 1, dtype=float)[None, :]
    diag_terms = mult * band.diag * cos2_diag(j, m)
    off_terms = 2.0 * mult * band.off * cos2_offdiag(j, m)
    d = math.fsum(math.fsum(col) for col in diag_terms.T)
    weights = np.array([math.fsum(col) for col in off_terms[:, : band.j_max - 1].T])
    return AlignmentSeries(d, weights)


def _evaluate(series: AlignmentSeries, tau) -> np.ndarray:
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    frac = tau - np.floor(tau)
    freq = series.frequencies
    out = np.empty(tau.size)
    step = max(1, _CHUNK_ELEMENTS // max(freq.size, 1))
    for start in range(0, tau.size, step):
        f = frac[start:start + step, None] * freq[None, :]
        phase = np.mod(f, 2.0)
        out[start:start + step] = series.diagonal + np.sum(series.weights * np.cos(np.pi * phase), axis=1)
    return out


def unitary_alignment(state, tau):
    """Decoherence-free ``<cos^2 beta>(tau)``; scalar in, scalar out."""
    values = _evaluate(alignment_series(state), tau)
    return float(values[0]) if np.ndim(tau) == 0 else values


def decohered_alignment(unitary_value, gamma: float, t):
    """Single-event isotropizing decoherence at rate ``gamma`` [1/s]."""
    if gamma < 0:
        raise ValidationError("gamma must be >= 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("t must be >= 0")
    env = np.exp(-gamma * t)
    out = unitary_value * env + (1.0 - env) / 3.0
    return float(out) if np.ndim(out) == 0 else out


def classical_shear_alignment(initial_alignment: float, kappa: float, t):
    """Flat-space shear of the thermal orientation spread: decays to 1/2 on ``1/kappa``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("t must be >= 0")
    g = np.exp(-(kappa * t) ** 2)
    out = initial_alignment * g + 0.5 * (1.0 - g)
    return float(out) if np.ndim(out) == 0 else out


def classical_baseline(gamma: float, t):
    """Decohered classical plateau ``1/3 + exp(-gamma t)/6``."""
    if gamma < 0:
        raise ValidationError("gamma must be >= 0")
    out = 1.0 / 3.0 + np.exp(-gamma * np.asarray(t, dtype=float)) / 6.0
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TimeGrid:
    """Sampling of ``tau`` in ``[start, revivals]``.

    With ``refine`` set, windows of total width ``refine_width / kappa`` around
    every integer and half-integer ``tau`` get ``refine_points`` extra samples.
    """

    revivals: float = 3.0
    points: int = 3001
    start: float = 0.0
    refine: bool = False
    refine_points: int = 401
    refine_width: float = 10.0

    def __post_init__(self):
        if not self.revivals > self.start:
            raise ValidationError("grid end must exceed its start")
        if self.points < 2:
            raise ValidationError("grid needs at least 2 points")

    def build(self, kappa_t_rev: Optional[float] = None) -> np.ndarray:
        tau = np.linspace(self.start, self.revivals, self.points)
        if self.refine:
            if not kappa_t_rev:
                raise ValidationError("revival-centered refinement needs kappa * T_rev")
            half = 0.5 * self.refine_width / kappa_t_rev
            centers = np.arange(math.ceil(2 * self.start), math.floor(2 * self.revivals) + 1) / 2.0
            local = np.linspace(-half, half, self.refine_points)
            extra = (centers[:, None] + local[None, :]).ravel()
            extra = extra[(extra >= self.start) & (extra <= self.revivals)]
            tau = np.unique(np.concatenate([tau, extra, centers]))
        return tau


@dataclass
class AlignmentTrace:
    tau: np.ndarray
    t_seconds: np.ndarray
    unitary: np.ndarray
    decohered: np.ndarray
    classical: np.ndarray
    envelope: np.ndarray
    gamma: float
    kappa: float
    revival_time: float
    initial_alignment: float

    def check(self) -> None:
        combo = self.unitary * self.envelope + (1.0 - self.envelope) / 3.0
        if not np.allclose(self.decohered, combo, rtol=0.0, atol=1e-12):
            raise NanorevivalError("decohered channel inconsistent with the unitary channel")
        for name in ("unitary", "decohered", "classical"):
            v = getattr(self, name)
            if v.min() < -BOUND_TOLERANCE or v.max() > 1.0 + BOUND_TOLERANCE:
                raise NanorevivalError(f"{name} alignment left [0, 1]")

    def columns(self) -> dict:
        return {
            "tau": self.tau,
            "t_seconds": self.t_seconds,
            "alignment_unitary": self.unitary,
            "alignment_decohered": self.decohered,
            "alignment_classical": self.classical,
            "envelope": self.envelope,
        }


def trace(
    state,
    env: Optional[EnvironmentSpec] = None,
    grid: TimeGrid = TimeGrid(),
    rotor: Optional[physcore.RotorSpec] = None,
    temperature: Optional[float] = None,
    gamma: Optional[float] = None,
) -> AlignmentTrace:
    """All signal channels on a time grid.

    ``rotor`` and ``temperature`` default to the metadata carried by an exact
    state; a bare :class:`BandedDensity` needs them passed in.  ``gamma``
    overrides the rate derived from ``env``.
    """
    if isinstance(state, ThermalRotorState):
        rotor = rotor or state.rotor
        temperature = temperature or state.temperature
    if rotor is None or temperature is None:
        raise ValidationError("trace needs the rotor and temperature of the state")
    t_rev = physcore.revival_time(rotor)
    kappa = physcore.shear_rate(rotor, temperature)
    if gamma is None:
        gamma = decoherence_rate(rotor, env) if env is not None else 0.0
    tau = grid.build(kappa * t_rev)
    if np.any(np.diff(tau) <= 0):
        raise ValidationError("time grid must be strictly increasing")
    if tau[0] < 0:
        raise ValidationError("time grid must start at tau >= 0")
    series = alignment_series(state)
    a0 = float(_evaluate(series, 0.0)[0])
    t = tau * t_rev
    unitary = _evaluate(series, tau)
    envelope = np.exp(-gamma * t)
    decohered = unitary * envelope + (1.0 - envelope) / 3.0
    classical = decohered_alignment(classical_shear_alignment(a0, kappa, t), gamma, t)
    out = AlignmentTrace(tau, t, unitary, decohered, np.atleast_1d(classical), envelope,
                         gamma, kappa, t_rev, a0)
    out.check()
    return out
