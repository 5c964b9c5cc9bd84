"""Alignment revivals under a weak external torque.

The torque potential ``V_ext = -N sin^2(beta) cos^2(alpha)`` couples ``m`` to
``m +- 2`` within each ``j`` shell and, more weakly, neighbouring shells.  For
torques far below the rotational energy the shell-mixing is dropped and each
shell evolves with its own propagator

    U_j = exp(-i pi tau H_j / B),   H_j / B = j(j+1) + V_j / B,

with ``V_j`` the in-shell matrix of ``V_ext``.  ``V_j`` splits into the even
and odd ``m`` chains, each a symmetric tridiagonal matrix.

The released thermal state is diagonal in ``m`` and ``cos^2`` only links
``j`` to ``j`` and ``j +- 2``, so the signal

    A(tau) = sum_j tr(rho_jj U_j^+ C_jj U_j) + 2 Re sum_j tr(rho_j,j+2 U_j+2^+ C_j+2,j U_j)

needs only the banded density.  In the eigenbasis ``W`` of ``V_j`` each term
is a double sum over eigenvalue pairs with weights ``(W^T rho W) * (W^T C W)``;
shells are processed one at a time and never all held in memory.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import physcore
from .constants import K_B
from .errors import MemoryCapError, MonotonicityError, ValidationError
from .evolve import AlignmentTrace, classical_shear_alignment
from .rotorstate import BandedDensity, ThermalRotorState
from .specfun import cos2_diag, cos2_offdiag, sin2cos2_diag, sin2cos2_step

log = logging.getLogger(__name__)

DEFAULT_MEMORY_CAP = 2e9  # matrix entries
MONOTONICITY_NOISE = 1e-6
PERTURBATIVE_LIMIT = 0.1  # warn above N_ext / kT


def _m_values(j: int) -> np.ndarray:
    return np.arange(-j, j + 1)


def vj_block(j: int, n_ext_over_b: float) -> np.ndarray:
    """In-shell matrix of ``V_ext / B``, rows and columns ordered ``m = -j..j``."""
    if j < 0:
        raise ValidationError("j must be >= 0")
    m = _m_values(j).astype(float)
    out = np.diag(-n_ext_over_b * sin2cos2_diag(j, m))
    if j >= 1:
        step = -n_ext_over_b * sin2cos2_step(j, m[:-2])
        idx = np.arange(2 * j - 1)
        out[idx + 2, idx] = step
        out[idx, idx + 2] = step
    return out


@dataclass(frozen=True)
class ShellEigensystem:
    """Eigen-decomposition of ``V_j / B`` on one ``m`` chain of a shell.

    ``m`` lists the chain (ascending, step 2); ``vectors[:, n]`` is the
    ``n``-th eigenvector in that basis.
    """

    j: int
    m: np.ndarray
    shifts: np.ndarray
    vectors: np.ndarray


def shell_chains(j: int, n_ext_over_b: float) -> list:
    """Even-``m`` and odd-``m`` chains of shell ``j`` (empty chains omitted)."""
    chains = []
    for start in (-j, -j + 1):
        m = np.arange(start, j + 1, 2)
        if m.size == 0:
            continue
        mf = m.astype(float)
        d = -n_ext_over_b * sin2cos2_diag(j, mf)
        if m.size == 1:
            chains.append(ShellEigensystem(j, m, d.copy(), np.ones((1, 1))))
            continue
        e = -n_ext_over_b * sin2cos2_step(j, mf[:-1])
        if n_ext_over_b == 0.0:
            w, v = np.zeros(m.size), np.eye(m.size)
        else:
            w, v = eigh_tridiagonal(d, e)
        chains.append(ShellEigensystem(j, m, w, v))
    return chains


def propagator_j(j: int, n_ext_over_b: float, tau: float) -> np.ndarray:
    """``exp(-i pi tau H_j / B)`` on shell ``j`` (basis ``m = -j..j``)."""
    size = 2 * j + 1
    u = np.zeros((size, size), dtype=complex)
    base = _phase(tau, j * (j + 1))
    for ch in shell_chains(j, n_ext_over_b):
        idx = ch.m + j
        ph = np.exp(-1j * np.pi * tau * ch.shifts)
        u[np.ix_(idx, idx)] = (ch.vectors * ph) @ ch.vectors.T
    return base * u


def _phase(tau: float, integer_energy: int) -> complex:
    """``exp(-i pi tau E)`` for integer ``E`` with the angle reduced exactly."""
    frac = tau - math.floor(tau)
    arg = math.fmod(frac * integer_energy, 2.0)
    return complex(math.cos(math.pi * arg), -math.sin(math.pi * arg))


def _phases(tau: np.ndarray, integer_energy: int) -> np.ndarray:
    frac = tau - np.floor(tau)
    arg = np.mod(frac * integer_energy, 2.0)
    return np.exp(-1j * np.pi * arg)


def _band_of(state) -> BandedDensity:
    if isinstance(state, ThermalRotorState):
        return state.band
    if isinstance(state, BandedDensity):
        return state
    raise TypeError(f"expected a thermal state or banded density, got {type(state).__name__}")


def _rho_along(values: np.ndarray, m: np.ndarray, j: int) -> np.ndarray:
    """Band row ``values[|m|, j]`` for each chain ``m`` (zero beyond the stored ``m``)."""
    am = np.abs(m)
    out = np.zeros(m.size)
    ok = am < values.shape[0]
    out[ok] = values[am[ok], j]
    return out


def _pair_sum(left: np.ndarray, weights: np.ndarray, right: np.ndarray) -> np.ndarray:
    """``sum_{n n'} conj(left[t, n]) weights[n, n'] right[t, n']`` for every row ``t``."""
    return np.einsum("tn,tn->t", np.conj(left), right @ weights.T)


def shell_contributions(band: BandedDensity, n_ext_over_b: float, tau: np.ndarray,
                        memory_cap: float = DEFAULT_MEMORY_CAP) -> np.ndarray:
    """Per-shell alignment contributions, shape ``(j_max + 1, len(tau))``.

    Row ``j`` holds the ``(j, j)`` term plus the ``(j, j+2)`` coherence term.
    """
    tau = np.asarray(tau, dtype=float)
    j_max = band.j_max
    largest = tau.size * (2 * j_max + 5) + (2 * j_max + 1) ** 2
    if largest > memory_cap:
        raise MemoryCapError(
            f"one shell needs {largest:.3g} matrix entries, above the cap of {memory_cap:.3g}"
        )
    total = sum((2 * j + 1) ** 2 for j in range(j_max + 1))
    if total > memory_cap:
        log.info("shells hold %.3g entries in total; streaming one shell at a time", total)
    out = np.zeros((j_max + 1, tau.size))
    chains = {}
    for j in range(j_max + 1):
        for jj in (j, j + 2):
            if jj <= j_max and jj not in chains:
                chains[jj] = shell_chains(jj, n_ext_over_b)
        cur = chains.pop(j)
        acc = np.zeros(tau.size)
        for ch in cur:
            rho = _rho_along(band.diag, ch.m, j)
            if not rho.any():
                continue
            w = ch.vectors
            x = (w.T * rho) @ w
            g = (w.T * cos2_diag(j, ch.m.astype(float))) @ w
            p = np.exp(1j * np.pi * tau[:, None] * ch.shifts[None, :])
            acc += _pair_sum(p, x * g, p).real
        if j + 2 <= j_max:
            # exp(+i pi tau [(j+2)(j+3) - j(j+1)]) carries the free part exactly
            base = _phases(tau, -(4 * j + 6))
            for ch, ch2 in zip(cur, _matching_chains(cur, chains[j + 2])):
                rho = _rho_along(band.off, ch.m, j)
                if not rho.any():
                    continue
                w2 = ch2.vectors[(ch.m - ch2.m[0]) // 2, :]
                x = (ch.vectors.T * rho) @ w2
                g = (ch.vectors.T * cos2_offdiag(j, ch.m.astype(float))) @ w2
                p = np.exp(1j * np.pi * tau[:, None] * ch.shifts[None, :])
                p2 = np.exp(1j * np.pi * tau[:, None] * ch2.shifts[None, :])
                acc += 2.0 * (base * _pair_sum(p, x * g, p2)).real
        out[j] = acc
    return out


def _matching_chains(cur, nxt):
    """For each chain of shell j, the chain of shell j+2 with the same ``m`` parity."""
    by_parity = {int(ch.m[0]) % 2: ch for ch in nxt}
    return [by_parity[int(ch.m[0]) % 2] for ch in cur]


def shell_alignment(state, n_ext_over_b: float, tau, memory_cap: float = DEFAULT_MEMORY_CAP) -> np.ndarray:
    """Alignment under the shell-conserving torque propagators (dimensionless kernel)."""
    if n_ext_over_b < 0:
        raise ValidationError("external torque must be >= 0")
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    rows = shell_contributions(_band_of(state), n_ext_over_b, tau, memory_cap)
    return np.array([math.fsum(col) for col in rows.T])


def eigenstate_alignment(state: ThermalRotorState, n_ext_over_b: float, tau) -> np.ndarray:
    """Reference path: propagate every populated eigenstate separately.

    Builds the full shell propagators, so only meant for small systems.  The
    state must have been prepared with ``keep_vectors=True``.
    """
    if any(b.vectors is None for b in state.blocks):
        raise ValidationError("eigenstate path needs a state prepared with keep_vectors=True")
    j_max = state.j_max
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    c_diag = [cos2_diag(j, _m_values(j).astype(float)) for j in range(j_max + 1)]
    c_off = [cos2_offdiag(j, _m_values(j).astype(float)) for j in range(j_max + 1)]
    out = np.zeros(tau.size)
    for it, t in enumerate(tau):
        props = [propagator_j(j, n_ext_over_b, t) for j in range(j_max + 1)]
        terms = []
        for blk in state.blocks:
            for sign in ((1,) if blk.m == 0 else (1, -1)):
                m = sign * blk.m
                for k, p in enumerate(blk.weights):
                    psi = {}
                    for j, c in zip(blk.j, blk.vectors[:, k]):
                        psi[int(j)] = props[j][:, m + j] * c
                    val = 0.0
                    for j, v in psi.items():
                        val += float(np.vdot(v, c_diag[j] * v).real)
                        if j + 2 in psi:
                            w = psi[j + 2][2:-2]
                            val += 2.0 * float(np.vdot(v, c_off[j] * w).real)
                    terms.append(p * val)
        out[it] = math.fsum(terms)
    return out


@dataclass
class TorqueScenario:
    """Released thermal state evolving under a constant external torque [N m]."""

    external_torque: float
    state: ThermalRotorState
    revival_index: int = 1
    tau: Optional[np.ndarray] = None
    rotor: Optional[physcore.RotorSpec] = None
    temperature: Optional[float] = None
    memory_cap: float = DEFAULT_MEMORY_CAP

    def __post_init__(self):
        if not self.external_torque >= 0:
            raise ValidationError("external torque must be >= 0")
        if self.revival_index < 0:
            raise ValidationError("revival index must be >= 0")
        self.rotor = self.rotor or getattr(self.state, "rotor", None)
        self.temperature = self.temperature or getattr(self.state, "temperature", None)
        if self.rotor is None or self.temperature is None:
            raise ValidationError("torque scenario needs the rotor and temperature")
        if self.tau is None:
            half = 5.0 / (physcore.shear_rate(self.rotor, self.temperature)
                          * physcore.revival_time(self.rotor))
            self.tau = self.revival_index + np.linspace(-half, half, 201)
        self.tau = np.asarray(self.tau, dtype=float)
        ratio = self.external_torque / (K_B * self.temperature)
        if ratio > PERTURBATIVE_LIMIT:
            warnings.warn(
                f"N_ext = {ratio:.3g} kT; shell-conserving propagation assumes N_ext << kT",
                RuntimeWarning, stacklevel=2,
            )

    @property
    def n_ext_over_b(self) -> float:
        return physcore.energy_over_b(self.rotor, self.external_torque)


def torque_alignment(scenario: TorqueScenario) -> AlignmentTrace:
    """Alignment trace of a torque scenario (no decoherence)."""
    tau = scenario.tau
    values = shell_alignment(scenario.state, scenario.n_ext_over_b, tau, scenario.memory_cap)
    t_rev = physcore.revival_time(scenario.rotor)
    kappa = physcore.shear_rate(scenario.rotor, scenario.temperature)
    a0 = scenario.state.initial_alignment()
    t = tau * t_rev
    ones = np.ones(tau.size)
    classical = np.atleast_1d(classical_shear_alignment(a0, kappa, np.abs(t)))
    out = AlignmentTrace(tau, t, values, values.copy(), classical, ones, 0.0, kappa, t_rev, a0)
    out.check()
    return out


@dataclass(frozen=True)
class SweepRow:
    external_torque: float
    revival_alignment: float


def revival_decay_sweep(state, n: int, torque_list: Sequence[float],
                        rotor: Optional[physcore.RotorSpec] = None,
                        memory_cap: float = DEFAULT_MEMORY_CAP,
                        check_monotone: bool = True) -> list:
    """Alignment at ``tau = n`` for each torque [N m], ascending in torque.

    Raises :class:`MonotonicityError` when the revival height increases with
    torque by more than the sweep noise.
    """
    rotor = rotor or getattr(state, "rotor", None)
    if rotor is None:
        raise ValidationError("sweep needs the rotor to convert torques")
    torques = sorted(float(x) for x in torque_list)
    if any(x < 0 for x in torques):
        raise ValidationError("torques must be >= 0")
    rows = []
    for torque in torques:
        a = shell_alignment(state, physcore.energy_over_b(rotor, torque), [float(n)], memory_cap)
        rows.append(SweepRow(torque, float(a[0])))
    if check_monotone:
        for a, b in zip(rows, rows[1:]):
            if b.revival_alignment > a.revival_alignment + MONOTONICITY_NOISE:
                raise MonotonicityError(
                    f"revival height rises from {a.revival_alignment:.9g} at N={a.external_torque:g} "
                    f"to {b.revival_alignment:.9g} at N={b.external_torque:g}"
                )
    return rows
