import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ive

from nanorevival import physcore, rotorstate as rs
from nanorevival.constants import K_B
from nanorevival.errors import TruncationError, ValidationError
from oracles import (SphereQuadrature, basis, classical_alignment_quad, cos2, dense_operator,
                     legendre_dvr_eigenvalues)


def test_free_block_is_diagonal():
    blk = rs.hamiltonian_block(3, "odd", 15, 0.0)
    assert np.array_equal(blk.j, [3, 5, 7, 9, 11, 13, 15])
    assert np.allclose(blk.diagonal, blk.j * (blk.j + 1.0), atol=0)
    assert np.all(blk.offdiagonal == 0)


def test_two_by_two_block():
    blk = rs.hamiltonian_block(0, "even", 2, 1.0)
    c = 2 / (3 * math.sqrt(5))
    expected = np.array([[-1 / 3, -c], [-c, 6 - 11 / 21]])
    assert np.allclose(blk.dense(), expected, atol=1e-15)


@pytest.mark.parametrize("args", [(0, 2, 10, 1.0), (5, 0, 6, 1.0), (0, "up", 10, 1.0)])
def test_block_validation(args):
    with pytest.raises(ValidationError):
        rs.hamiltonian_block(*args)


def test_m0_eigenvalues_match_position_space():
    ref = legendre_dvr_eigenvalues(10.0, nodes=120)[:12]
    blocks = [rs.hamiltonian_block(0, p, 40, 10.0) for p in (0, 1)]
    ours = np.sort(np.concatenate([np.linalg.eigvalsh(b.dense()) for b in blocks]))[:12]
    assert np.allclose(ours, ref, atol=1e-8, rtol=0)


def test_thermal_state_invariants():
    st_ = rs.thermal_state(40.0, 200.0, keep_vectors=True)
    assert st_.total_weight() == pytest.approx(1.0, abs=1e-12)
    assert st_.band.trace() == pytest.approx(1.0, abs=1e-10)
    for b in st_.blocks:
        assert np.all(b.weights >= 0)
        v = b.vectors
        assert np.abs(v.T @ v - np.eye(v.shape[1])).max() < 1e-10
    d, o = st_.band.diag, st_.band.off
    assert d.min() >= -1e-12
    bound = np.sqrt(np.clip(d[:, :-2] * d[:, 2:], 0, None)) + 1e-12
    assert np.all(np.abs(o[:, :-2]) <= bound)


def test_band_equals_dense_thermal_density():
    j_max, kT, v0 = 8, 3.0, 6.0
    q = SphereQuadrature(j_max)
    idx = basis(j_max)
    c = dense_operator(j_max, cos2, q)
    jj = np.array([j for j, _ in idx], dtype=float)
    h = np.diag(jj * (jj + 1)) - v0 * c
    e, w = np.linalg.eigh(h)
    p = np.exp(-(e - e.min()) / kT)
    rho = (w * (p / p.sum())) @ w.T
    state = rs.thermal_state(kT, v0, rs.BasisTruncation(j_max=j_max, tail_epsilon=1.0, weight_floor=1e-300))
    band = state.band
    for a, (j, m) in enumerate(idx):
        for b, (jp, mp) in enumerate(idx):
            if m != mp or (j - jp) % 2:
                assert abs(rho[a, b]) < 1e-13
            elif abs(j - jp) <= 2:
                assert band.element(j, jp, m) == pytest.approx(rho[a, b], abs=1e-12)
    # log partition function against the dense spectrum
    lnz = -e.min() / kT + math.log(np.exp(-(e - e.min()) / kT).sum())
    assert state.log_partition == pytest.approx(lnz, abs=1e-12)


@pytest.mark.parametrize("kT", [0.1, 1.0, 37.0, 500.0])
def test_free_rotor_alignment_is_one_third(kT):
    state = rs.thermal_state(kT, 0.0)
    assert state.initial_alignment() == pytest.approx(1 / 3, abs=1e-10)


def test_cold_free_rotor_ground_state():
    state = rs.thermal_state(0.1, 0.0)
    z = math.exp(state.log_partition)
    assert state.band.element(0, 0, 0) == pytest.approx(1 / z, rel=1e-12)
    assert state.band.element(0, 0, 0) > 0.99999
    assert state.initial_alignment() == pytest.approx(1 / 3, abs=1e-12)


def test_mean_j_matches_closed_form():
    cnt = physcore.get_preset("CNT").rotor
    b = physcore.rotational_constant(cnt)
    temperature = 400.0 * b / K_B
    state = rs.prepare_exact(cnt, physcore.TrapSpec(0.0, 30e-6), temperature)
    assert state.mean_j() == pytest.approx(physcore.mean_j(cnt, temperature), rel=0.03)


def test_hot_rotor_follows_classical_boltzmann():
    # kT = 2000 B, V0 = kT / 2: quantum corrections are of order B/kT
    state = rs.thermal_state(2000.0, 1000.0)
    assert state.initial_alignment() == pytest.approx(classical_alignment_quad(0.5), abs=2e-3)
    assert state.initial_alignment() - 1 / 3 == pytest.approx(4 * 0.5 / 45, rel=0.1)


@pytest.mark.parametrize("a", [1e-6, 0.01, 0.5, 3.0, 20.0, 500.0, 5000.0])
def test_classical_alignment_dawson_vs_quadrature(a):
    assert rs.classical_alignment(a) == pytest.approx(classical_alignment_quad(a), rel=1e-10)


def test_asymptotic_alignment_value():
    assert rs.alignment_asymptotic(0.05) == pytest.approx(0.95)


def test_deep_trap_alignment_close_to_asymptote():
    kT = 4000.0
    state = rs.thermal_state(kT, kT / 0.02)
    one_minus = 1 - state.initial_alignment()
    assert abs(one_minus - 0.02) / one_minus <= 0.05


def test_partition_function_closed_form_properties():
    kT = 1000.0
    for v0 in (6e3, 2e4, 1e5):
        h = v0 * 1e-6
        deriv = (rs.log_partition_asymptotic(kT, v0 + h) - rs.log_partition_asymptotic(kT, v0 - h)) / (2 * h)
        assert kT * deriv == pytest.approx(1 - kT / v0, rel=1e-6)
    vals = [rs.log_partition_asymptotic(kT, v) for v in np.linspace(5e3, 1e5, 20)]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValidationError):
        rs.log_partition_asymptotic(kT, 2 * kT)


def test_partition_function_derivative_against_exact():
    kT, v0 = 2000.0, 40000.0
    h = 20.0
    up = rs.thermal_state(kT, v0 + h).log_partition
    dn = rs.thermal_state(kT, v0 - h).log_partition
    exact = kT * (up - dn) / (2 * h)
    asym = 1 - kT / v0
    assert exact == pytest.approx(asym, rel=0.05)
    # Hellmann-Feynman: the same derivative is the alignment
    assert exact == pytest.approx(rs.thermal_state(kT, v0).initial_alignment(), abs=1e-6)


def test_partition_function_si_wrapper():
    cnt = physcore.get_preset("CNT").rotor
    trap = physcore.TrapSpec(5.0, 30e-6, depth_override=K_B * 2e-3)
    b = physcore.rotational_constant(cnt)
    expected = rs.log_partition_asymptotic(K_B * 1e-4 / b, K_B * 2e-3 / b)
    assert rs.partition_function_asymptotic(cnt, trap, 1e-4) == pytest.approx(expected, rel=1e-14)


def test_truncation_failure_reports_tail():
    with pytest.raises(TruncationError) as info:
        rs.thermal_state(50.0, 0.0, rs.BasisTruncation(j_max=10))
    assert info.value.tail > 1e-8
    assert info.value.j_max == 10


def test_truncation_validation():
    with pytest.raises(ValidationError):
        rs.BasisTruncation(j_max=1)
    with pytest.raises(ValidationError):
        rs.thermal_state(-1.0, 1.0)


def test_thread_count_does_not_change_state():
    a = rs.thermal_state(1500.0, 20000.0, threads=1)
    b = rs.thermal_state(1500.0, 20000.0, threads=4)
    assert np.array_equal(a.band.diag, b.band.diag)
    assert np.array_equal(a.band.off, b.band.off)
    assert a.log_partition == b.log_partition


def test_state_cache_round_trip(tmp_path):
    cnt = physcore.get_preset("CNT").rotor
    trap = physcore.TrapSpec(5.0, 30e-6, depth_override=K_B * 0.5)
    first = rs.prepare_exact(cnt, trap, 1e-5, cache_dir=tmp_path)
    files = list(tmp_path.glob("*.npz"))
    assert len(files) == 1
    second = rs.prepare_exact(cnt, trap, 1e-5, cache_dir=tmp_path)
    assert np.array_equal(first.band.diag, second.band.diag)
    assert second.initial_alignment() == first.initial_alignment()
    assert second.rotor == cnt
    other = rs.state_cache_key(cnt, trap, 2e-5, rs.BasisTruncation())
    assert other != files[0].stem


def semiclassical_log_element(j, jp, m, kT, v0):
    s = j + jp + 1
    z = v0 / (2 * kT) * (1 - 4 * m * m / s**2)
    return math.log(ive((j - jp) // 2, z)) + 2 * z - s * s / (4 * kT)


def test_semiclassical_band_structure():
    kT, v0 = 400.0, 4000.0
    band = rs.semiclassical_band(kT, v0, 200, dj_max=4)
    assert band.trace() == pytest.approx(1.0, abs=1e-12)
    assert band.element(10, 11, 3) == 0.0
    ref = semiclassical_log_element(20, 20, 5, kT, v0) - semiclassical_log_element(30, 30, 2, kT, v0)
    assert math.log(band.element(20, 20, 5) / band.element(30, 30, 2)) == pytest.approx(ref, abs=1e-10)
    ref = semiclassical_log_element(20, 22, 5, kT, v0) - semiclassical_log_element(20, 20, 5, kT, v0)
    assert math.log(band.element(20, 22, 5) / band.element(20, 20, 5)) == pytest.approx(ref, abs=1e-10)
    ref = semiclassical_log_element(20, 24, 5, kT, v0) - semiclassical_log_element(20, 20, 5, kT, v0)
    assert math.log(band.element(24, 20, 5) / band.element(20, 20, 5)) == pytest.approx(ref, abs=1e-10)


def test_semiclassical_warns_when_cold():
    with pytest.warns(RuntimeWarning):
        rs.semiclassical_band(2.0, 10.0, 20)


def test_semiclassical_free_rotor_isotropic():
    band = rs.semiclassical_band(900.0, 0.0, 250)
    assert rs.band_alignment(band) == pytest.approx(1 / 3, abs=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 300.0), st.floats(0.0, 300.0))
def test_state_invariants_random(kT, v0):
    state = rs.thermal_state(kT, v0, rs.BasisTruncation(tail_epsilon=1e-6))
    assert state.band.trace() == pytest.approx(1.0, abs=1e-10)
    assert state.total_weight() == pytest.approx(1.0, abs=1e-12)
    a = state.initial_alignment()
    assert 1 / 3 - 1e-10 <= a <= 1.0
    d, o = state.band.diag, state.band.off
    assert np.all(np.abs(o[:, :-2]) <= np.sqrt(np.clip(d[:, :-2] * d[:, 2:], 0, None)) + 1e-12)
