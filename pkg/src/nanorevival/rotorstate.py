"""Thermal orientation state of the trapped rotor.

The Hamiltonian ``J^2/2I - V0 cos^2(beta)`` conserves ``m`` and the parity of
``j``, so in units of ``B = hbar^2/2I`` it splits into independent
symmetric tridiagonal blocks ``(m, parity)`` on ``j = j0, j0+2, ...``.
Blocks ``m`` and ``-m`` are identical; only ``m >= 0`` is stored and
``m > 0`` rows carry multiplicity two.

The alignment observable only reads the ``|dj| <= 2, dm = 0`` band of the
density operator, so that band (:class:`BandedDensity`) is what the exact and
semiclassical preparations both produce.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import dawsn

from . import physcore
from .errors import TruncationError, ValidationError
from .specfun import cos2_diag, cos2_offdiag, log_bessel_i_scaled_array

log = logging.getLogger(__name__)

DEFAULT_WIDTH_FACTOR = 8.0
DEFAULT_TAIL_EPSILON = 1e-8
# Eigenstates whose Boltzmann factor relative to the ground state is below
# this are dropped (about 36.8 kT above the ground state).
DEFAULT_WEIGHT_FLOOR = 1e-16
# The truncation tail is the population of the top EDGE_LEVELS j values of
# each parity.
EDGE_LEVELS = 2


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count: explicit argument, then ``NANOREVIVAL_THREADS``, then all cores."""
    if threads is None:
        env = os.environ.get("NANOREVIVAL_THREADS")
        if env:
            threads = int(env)
    if threads is None or threads <= 0:
        threads = os.cpu_count() or 1
    return int(threads)


@dataclass(frozen=True)
class BasisTruncation:
    """Angular momentum cutoff policy.

    ``j_max=None`` selects ``ceil(c * max(sqrt(kT/B), (V0/B)^(1/4))) + 4``: the
    first term covers the thermal spread of ``j``, the second the zero-point
    spread of the librational ground state.
    """

    j_max: Optional[int] = None
    tail_epsilon: float = DEFAULT_TAIL_EPSILON
    width_factor: float = DEFAULT_WIDTH_FACTOR
    weight_floor: float = DEFAULT_WEIGHT_FLOOR

    def __post_init__(self):
        if self.j_max is not None and self.j_max < 2:
            raise ValidationError("j_max must be >= 2")
        if not self.tail_epsilon > 0:
            raise ValidationError("tail_epsilon must be > 0")
        if not 0 < self.weight_floor < 1:
            raise ValidationError("weight_floor must lie in (0, 1)")

    def resolve(self, kT_over_b: float, v0_over_b: float) -> int:
        if self.j_max is not None:
            return int(self.j_max)
        return choose_j_max(kT_over_b, v0_over_b, self.width_factor)


def choose_j_max(kT_over_b: float, v0_over_b: float, width_factor: float = DEFAULT_WIDTH_FACTOR) -> int:
    scale = max(math.sqrt(max(kT_over_b, 0.0)), max(v0_over_b, 0.0) ** 0.25, 1.0)
    return max(int(math.ceil(width_factor * scale)) + 4, 6)


@dataclass(frozen=True)
class TridiagonalBlock:
    """``H/B`` restricted to one ``(m, parity)`` block."""

    m: int
    parity: int
    j: np.ndarray
    diagonal: np.ndarray
    offdiagonal: np.ndarray

    def dense(self) -> np.ndarray:
        return (np.diag(self.diagonal) + np.diag(self.offdiagonal, 1)
                + np.diag(self.offdiagonal, -1))


def block_j_values(m: int, parity: int, j_max: int) -> np.ndarray:
    j0 = abs(m) + ((parity - abs(m)) % 2)
    return np.arange(j0, j_max + 1, 2)


_PARITY_NAMES = {"even": 0, "odd": 1}


def hamiltonian_block(m: int, parity: int, j_max: int, v0_over_b: float) -> TridiagonalBlock:
    """Matrix of ``H/B`` on ``{|jm>: j = parity (mod 2), |m| <= j <= j_max}``.

    ``parity`` is 0 or ``"even"`` for even ``j``, 1 or ``"odd"`` for odd ``j``.
    """
    parity = _PARITY_NAMES.get(parity, parity)
    if parity not in (0, 1):
        raise ValidationError(f"parity must be 0 (even j) or 1 (odd j), got {parity!r}")
    if j_max < abs(m) + 2:
        raise ValidationError(f"j_max={j_max} too small for m={m}")
    j = block_j_values(m, parity, j_max)
    jf = j.astype(float)
    diagonal = jf * (jf + 1.0) - v0_over_b * cos2_diag(jf, m)
    offdiagonal = -v0_over_b * cos2_offdiag(jf[:-1], m)
    return TridiagonalBlock(m, parity, j, diagonal, offdiagonal)


def _block_matrices(m, parity, j_max, v0_over_b):
    j = block_j_values(m, parity, j_max)
    jf = j.astype(float)
    return j, jf * (jf + 1.0) - v0_over_b * cos2_diag(jf, m), -v0_over_b * cos2_offdiag(jf[:-1], m)


def _lowest_eigenvalue(d, e) -> float:
    if len(d) == 1:
        return float(d[0])
    return float(eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, 0))[0])


def _solve_block(m, parity, j_max, v0_over_b, e_cut):
    j, d, e = _block_matrices(m, parity, j_max, v0_over_b)
    if len(j) == 0:
        return j, np.empty(0), np.empty((0, 0))
    if len(j) == 1:
        if d[0] <= e_cut:
            return j, d.copy(), np.ones((1, 1))
        return j, np.empty(0), np.empty((1, 0))
    if _lowest_eigenvalue(d, e) > e_cut:
        return j, np.empty(0), np.empty((len(j), 0))
    w, v = eigh_tridiagonal(d, e, select="v", select_range=(-np.inf, e_cut))
    return j, w, v


@dataclass
class BandedDensity:
    """``|dj| <= 2, dm = 0`` band of a density operator in the ``|jm>`` basis.

    ``diag[m, j] = <jm|rho|jm>`` and ``off[m, j] = <jm|rho|j+2 m>`` for
    ``m = 0..m_max``; the ``-m`` entries are identical.  ``extra`` optionally
    holds wider even bands, keyed by ``dj``.
    """

    diag: np.ndarray
    off: np.ndarray
    j_max: int
    extra: dict = field(default_factory=dict)

    @property
    def m_max(self) -> int:
        return self.diag.shape[0] - 1

    def multiplicity(self) -> np.ndarray:
        mult = np.full(self.diag.shape[0], 2.0)
        mult[0] = 1.0
        return mult

    def trace(self) -> float:
        return math.fsum(self.multiplicity() * self.diag.sum(axis=1))

    def element(self, j: int, j_prime: int, m: int) -> float:
        m = abs(m)
        if m > self.m_max or m > min(j, j_prime) or max(j, j_prime) > self.j_max:
            return 0.0
        lo, dj = min(j, j_prime), abs(j - j_prime)
        if dj == 0:
            return float(self.diag[m, lo])
        if dj == 2:
            return float(self.off[m, lo])
        if dj in self.extra:
            return float(self.extra[dj][m, lo])
        return 0.0

    def j_distribution(self) -> np.ndarray:
        """Population of each ``j`` (summed over ``m``)."""
        return self.multiplicity() @ self.diag

    def mean_j(self) -> float:
        p = self.j_distribution()
        return math.fsum(p * np.arange(p.size))

    def edge_population(self, levels: int = EDGE_LEVELS) -> float:
        p = self.j_distribution()
        return math.fsum(p[max(0, self.j_max + 1 - 2 * levels):])

    def normalized(self) -> "BandedDensity":
        tr = self.trace()
        return BandedDensity(self.diag / tr, self.off / tr, self.j_max,
                             {k: v / tr for k, v in self.extra.items()})


@dataclass
class EigenBlock:
    """Thermally populated eigenstates of one ``(m, parity)`` block.

    ``weights`` are the normalized probabilities of a single copy of the
    block; the ``-m`` copy carries the same weights.
    """

    m: int
    parity: int
    j: np.ndarray
    energies: np.ndarray
    weights: np.ndarray
    vectors: Optional[np.ndarray] = None

    @property
    def multiplicity(self) -> int:
        return 1 if self.m == 0 else 2


@dataclass
class ThermalRotorState:
    """Eigendecomposed thermal state ``exp(-H/kT)/Z`` (energies in units of B)."""

    blocks: list
    band: BandedDensity
    kT_over_b: float
    v0_over_b: float
    j_max: int
    ground_energy: float
    log_partition: float
    tail: float
    rotor: Optional[physcore.RotorSpec] = None
    temperature: Optional[float] = None
    v0: Optional[float] = None

    def total_weight(self) -> float:
        return math.fsum(b.multiplicity * w for b in self.blocks for w in b.weights)

    def initial_alignment(self) -> float:
        return band_alignment(self.band)

    def mean_j(self) -> float:
        return self.band.mean_j()


def _assemble_band(results, j_max, weight_of):
    m_max = max(r[0] for r in results)
    diag = np.zeros((m_max + 1, j_max + 1))
    off = np.zeros((m_max + 1, j_max + 1))
    for m, parity, j, w, v in results:
        if w.size == 0:
            continue
        p = weight_of(w)
        diag[m, j] = (v * v) @ p
        if j.size > 1:
            off[m, j[:-1]] = (v[:-1] * v[1:]) @ p
    return diag, off


def thermal_state(
    kT_over_b: float,
    v0_over_b: float,
    truncation: BasisTruncation = BasisTruncation(),
    threads: Optional[int] = None,
    keep_vectors: bool = False,
) -> ThermalRotorState:
    """Exact diagonalization of every ``(m, parity)`` block (dimensionless kernel)."""
    if not kT_over_b > 0:
        raise ValidationError("temperature must be > 0")
    if not v0_over_b >= 0:
        raise ValidationError("trap depth must be >= 0")
    j_max = truncation.resolve(kT_over_b, v0_over_b)
    ground = min(_lowest_eigenvalue(*_block_matrices(0, p, j_max, v0_over_b)[1:]) for p in (0, 1))
    e_cut = ground + math.log(1.0 / truncation.weight_floor) * kT_over_b

    workers = resolve_threads(threads)
    results = []
    chunk = max(8, 4 * workers)
    m = 0
    with ThreadPoolExecutor(max_workers=workers) as pool:
        done = False
        while not done and m <= j_max:
            tasks = [(mm, p) for mm in range(m, min(m + chunk, j_max + 1)) for p in (0, 1)]
            solved = list(pool.map(lambda t: _solve_block(t[0], t[1], j_max, v0_over_b, e_cut), tasks))
            for (mm, p), (j, w, v) in zip(tasks, solved):
                results.append((mm, p, j, w, v))
            # block ground energies grow with |m|: stop at the first empty m
            for mm in range(m, min(m + chunk, j_max + 1)):
                sizes = [r[3].size for r in results if r[0] == mm]
                if sum(sizes) == 0:
                    done = True
                    results = [r for r in results if r[0] < mm]
                    break
            m += chunk

    boltz = [np.exp(-(w - ground) / kT_over_b) for (_, _, _, w, _) in results]
    z_rel = math.fsum((1.0 if r[0] == 0 else 2.0) * float(b.sum()) for r, b in zip(results, boltz))
    log_z = -ground / kT_over_b + math.log(z_rel)

    diag, off = _assemble_band(results, j_max, lambda w: np.exp(-(w - ground) / kT_over_b) / z_rel)
    band = BandedDensity(diag, off, j_max)
    blocks = [
        EigenBlock(m_, p_, j_, w_, b_ / z_rel, v_ if keep_vectors else None)
        for (m_, p_, j_, w_, v_), b_ in zip(results, boltz) if w_.size
    ]
    tail = band.edge_population()
    if tail > truncation.tail_epsilon:
        raise TruncationError(
            f"neglected population {tail:.3g} exceeds tail_epsilon={truncation.tail_epsilon:g} "
            f"at j_max={j_max}", tail, j_max,
        )
    log.debug("thermal state: j_max=%d, blocks=%d, ln Z=%.6g", j_max, len(blocks), log_z)
    return ThermalRotorState(blocks, band, kT_over_b, v0_over_b, j_max, ground, log_z, tail)


def _dimensionless(spec, trap, temperature):
    if not temperature > 0:
        raise ValidationError("temperature must be > 0")
    b = physcore.rotational_constant(spec)
    v0 = physcore.trap_depth(spec, trap)
    return physcore.K_B * temperature / b, v0 / b, v0


def prepare_exact(
    spec: physcore.RotorSpec,
    trap: physcore.TrapSpec,
    temperature: float,
    truncation: BasisTruncation = BasisTruncation(),
    threads: Optional[int] = None,
    keep_vectors: bool = False,
    cache_dir: Optional[os.PathLike] = None,
) -> ThermalRotorState:
    """Thermal state of a physical rotor by exact diagonalization."""
    kT_b, v0_b, v0 = _dimensionless(spec, trap, temperature)
    path = None
    if cache_dir is not None and not keep_vectors:
        path = Path(cache_dir) / f"{state_cache_key(spec, trap, temperature, truncation)}.npz"
        if path.exists():
            state = load_state(path)
            state.rotor, state.temperature, state.v0 = spec, temperature, v0
            return state
    state = thermal_state(kT_b, v0_b, truncation, threads=threads, keep_vectors=keep_vectors)
    state.rotor, state.temperature, state.v0 = spec, temperature, v0
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_state(state, path)
    return state


def semiclassical_band(
    kT_over_b: float,
    v0_over_b: float,
    j_max: int,
    dj_max: int = 2,
    weight_floor: float = DEFAULT_WEIGHT_FLOOR,
) -> BandedDensity:
    """Bohr-Sommerfeld thermal band, trace-normalized.

    ``<jm|rho|j'm> ~ I_n(z) exp(z) exp(-(j+j'+1)^2 B/4kT)`` with
    ``n = (j-j')/2`` and ``z = (V0/2kT)(1 - 4m^2/(j+j'+1)^2)``, evaluated in
    the log domain.
    """
    if dj_max < 2 or dj_max % 2:
        raise ValidationError("dj_max must be an even integer >= 2")
    if kT_over_b < 10.0:
        warnings.warn(
            f"semiclassical state requested at kT/B={kT_over_b:.3g}; the formula "
            "assumes kT >> hbar^2/2I", RuntimeWarning, stacklevel=2,
        )
    a = 0.5 * v0_over_b / kT_over_b
    offsets = list(range(0, dj_max + 1, 2))
    rows = {dj: [] for dj in offsets}
    best = -math.inf
    drop = math.log(1.0 / weight_floor) + 50.0
    for m in range(0, j_max + 1):
        j = np.arange(m, j_max + 1, dtype=float)
        row_max = -math.inf
        for dj in offsets:
            out = np.full(j_max + 1, -np.inf)
            jj = j[j + dj <= j_max]
            if jj.size:
                s = 2.0 * jj + dj + 1.0
                z = a * (1.0 - 4.0 * m * m / (s * s))
                vals = log_bessel_i_scaled_array(dj // 2, z) + 2.0 * z - 2.0 * a - s * s / (4.0 * kT_over_b)
                out[jj.astype(int)] = vals
                row_max = max(row_max, float(vals.max()))
            rows[dj].append(out)
        best = max(best, row_max)
        if row_max < best - drop:
            break
    mats = {dj: np.exp(np.array(rows[dj]) - best) for dj in offsets}
    band = BandedDensity(mats.pop(0), mats.pop(2), j_max, mats)
    return band.normalized()


def prepare_semiclassical(
    spec: physcore.RotorSpec,
    trap: physcore.TrapSpec,
    temperature: float,
    truncation: BasisTruncation = BasisTruncation(),
    dj_max: int = 2,
) -> BandedDensity:
    kT_b, v0_b, _ = _dimensionless(spec, trap, temperature)
    return semiclassical_band(kT_b, v0_b, truncation.resolve(kT_b, v0_b), dj_max,
                              truncation.weight_floor)


def band_alignment(band: BandedDensity) -> float:
    """``tr(rho cos^2 beta)`` from the band."""
    mult = band.multiplicity()
    m = np.arange(band.diag.shape[0], dtype=float)[:, None]
    j = np.arange(band.j_max + 1, dtype=float)[None, :]
    per_m = (band.diag * cos2_diag(j, m)).sum(axis=1) + 2.0 * (band.off * cos2_offdiag(j, m)).sum(axis=1)
    return math.fsum(mult * per_m)


def initial_alignment(state) -> float:
    band = state.band if isinstance(state, ThermalRotorState) else state
    return band_alignment(band)


def alignment_asymptotic(kT_over_v0: float) -> float:
    """Leading-order deep-trap alignment ``1 - kT/V0``."""
    return 1.0 - kT_over_v0


def classical_alignment(v0_over_kT: float) -> float:
    """Classical thermal ``<cos^2 beta>`` in the ``-V0 cos^2`` well.

    With ``a = V0/kT``: ``1/(2 sqrt(a) F(sqrt(a))) - 1/(2a)``, ``F`` the
    Dawson integral.
    """
    a = float(v0_over_kT)
    if a < 0:
        raise ValidationError("V0/kT must be >= 0")
    if a < 1e-4:
        return 1.0 / 3.0 + 4.0 * a / 45.0
    r = math.sqrt(a)
    return 1.0 / (2.0 * r * float(dawsn(r))) - 1.0 / (2.0 * a)


def log_partition_asymptotic(kT_over_b: float, v0_over_b: float) -> float:
    """``ln Z`` with ``Z ~ I (kT)^2/(hbar^2 V0) exp(V0/kT)``, energies in units of B."""
    if not v0_over_b > 0:
        raise ValidationError("asymptotic partition function needs V0 > 0")
    if kT_over_b / v0_over_b > 0.2:
        raise ValidationError("asymptotic partition function needs kT/V0 <= 0.2")
    return 2.0 * math.log(kT_over_b) - math.log(2.0 * v0_over_b) + v0_over_b / kT_over_b


def partition_function_asymptotic(spec, trap, temperature) -> float:
    kT_b, v0_b, _ = _dimensionless(spec, trap, temperature)
    return log_partition_asymptotic(kT_b, v0_b)


# -- on-disk cache --------------------------------------------------------------

_CACHE_VERSION = 1


def state_cache_key(spec, trap, temperature, truncation) -> str:
    payload = {
        "v": _CACHE_VERSION,
        "rotor": [spec.mass, spec.length, spec.effective_diameter, spec.polarizability_anisotropy],
        "trap": [trap.power, trap.waist, trap.depth_override],
        "temperature": temperature,
        "truncation": asdict(truncation),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:32]


def save_state(state: ThermalRotorState, path) -> None:
    """Write header metadata (JSON) plus per-block arrays to ``path`` (npz)."""
    header = {
        "version": _CACHE_VERSION,
        "kT_over_b": state.kT_over_b,
        "v0_over_b": state.v0_over_b,
        "j_max": state.j_max,
        "ground_energy": state.ground_energy,
        "log_partition": state.log_partition,
        "tail": state.tail,
        "blocks": [[b.m, b.parity] for b in state.blocks],
    }
    arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
              "diag": state.band.diag, "off": state.band.off}
    for i, b in enumerate(state.blocks):
        arrays[f"b{i}_j"] = b.j
        arrays[f"b{i}_e"] = b.energies
        arrays[f"b{i}_w"] = b.weights
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_state(path) -> ThermalRotorState:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header.get("version") != _CACHE_VERSION:
            raise ValidationError(f"unsupported state cache version in {path}")
        blocks = [
            EigenBlock(m, p, data[f"b{i}_j"], data[f"b{i}_e"], data[f"b{i}_w"])
            for i, (m, p) in enumerate(header["blocks"])
        ]
        band = BandedDensity(data["diag"], data["off"], header["j_max"])
    return ThermalRotorState(
        blocks, band, header["kT_over_b"], header["v0_over_b"], header["j_max"],
        header["ground_energy"], header["log_partition"], header["tail"],
    )
