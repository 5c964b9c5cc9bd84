"""Acceptance criteria, each at its stated tolerance.

Every criterion prints one PASS/FAIL line (collected in the terminal summary
under "acceptance criteria") followed by the individual checks behind it.
"""

import math
import os
import warnings

import numpy as np
import pytest

import conftest
from nanorevival import (cli, decorates, evolve, macroscopicity as mc, physcore, rotorstate as rs,
                         torquesense as ts)
from oracles import dense_torque_alignment

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


class Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []
        self.notes = []

    def note(self, text):
        self.notes.append(f"    [skip] {text}")

    def check(self, label, ok, detail):
        self.checks.append((label, bool(ok), detail))

    def finish(self):
        ok = all(c[1] for c in self.checks)
        lines = [f"criterion {self.number} {'PASS' if ok else 'FAIL'}: {self.title}"]
        for label, c_ok, detail in self.checks:
            lines.append(f"    [{'ok' if c_ok else 'FAIL'}] {label}: {detail}")
        lines.extend(self.notes)
        conftest.ACCEPTANCE_LINES.extend(lines)
        print("\n".join(lines))
        failed = [c[0] for c in self.checks if not c[1]]
        assert not failed, f"criterion {self.number} failed: {', '.join(failed)}"


def within(value, target, rel):
    return abs(value - target) <= rel * abs(target)


def test_criterion_1_derived_constants():
    c = Criterion(1, "derived constants")
    targets = [
        ("T_rev CNT [ms]", physcore.revival_time(physcore.get_preset("CNT").rotor) * 1e3, 3.8, 0.03),
        ("T_rev SNR [ms]", physcore.revival_time(physcore.get_preset("SNR").rotor) * 1e3, 28.0, 0.03),
        ("T_rev 1e6 amu, 50 nm [ms]", physcore.revival_time(physcore.RotorSpec.from_amu(1e6, 50e-9)) * 1e3, 21.0, 0.03),
        ("T_rev TMV [s]", physcore.revival_time(physcore.get_preset("TMV").rotor), 30.0, 0.05),
        ("<j> 1e6 amu, 50 nm, 1 K", physcore.mean_j(physcore.RotorSpec.from_amu(1e6, 50e-9), 1.0), 2.6e4, 0.03),
    ]
    drop, speed = physcore.drop_kinematics(0.021)
    targets += [("drop at 21 ms [mm]", drop * 1e3, 2.1, 0.03), ("speed at 21 ms [m/s]", speed, 0.2, 0.03)]
    for label, value, target, rel in targets:
        c.check(label, within(value, target, rel),
                f"{value:.5g} vs {target:g} +- {rel:.0%} (off by {value / target - 1:+.2%})")
    c.finish()


def test_criterion_2_gas_decoherence():
    c = Criterion(2, "gas decoherence time of the nanotube")
    cnt = physcore.get_preset("CNT").rotor
    rate = decorates.gas_rate(cnt, decorates.EnvironmentSpec.from_mbar(5e-9))
    c.check("d_eff", cnt.effective_diameter == pytest.approx(3e-9), f"{cnt.effective_diameter * 1e9:.3g} nm")
    c.check("1/Gamma in [130, 160] ms", 0.130 <= 1 / rate <= 0.160, f"{1e3 / rate:.4g} ms")
    c.finish()


def _peak_fwhm(tau, values, center, baseline):
    """Full width at half height of the peak at ``center`` above ``baseline``."""
    i0 = int(np.argmin(np.abs(tau - center)))
    half = baseline + 0.5 * (values[i0] - baseline)
    edges = []
    for step in (-1, 1):
        i = i0
        while values[i + step] > half:
            i += step
        a, b = i, i + step
        edges.append(tau[a] + (half - values[a]) * (tau[b] - tau[a]) / (values[b] - values[a]))
    return edges[1] - edges[0]


@pytest.fixture(scope="module")
def fig2_traces(cnt_state_100uk, cnt_state_1mk):
    env = decorates.EnvironmentSpec.from_mbar(5e-9)
    grid = evolve.TimeGrid(revivals=3.0, points=3001, refine=True)
    return {T: evolve.trace(s, env, grid) for T, s in ((100e-6, cnt_state_100uk), (1e-3, cnt_state_1mk))}


@pytest.mark.slow
def test_criterion_3_released_rotor_traces(fig2_traces):
    c = Criterion(3, "released nanotube traces at 100 uK and 1 mK")
    widths = {}
    for T, tr in fig2_traces.items():
        tag = f"{T * 1e6:g} uK"
        plateau = float(np.median(tr.unitary[(tr.tau > 0.1) & (tr.tau < 0.4)]))
        c.check(f"{tag} plateau 1/2 +- 0.02", abs(plateau - 0.5) <= 0.02, f"{plateau:.5f}")
        i1 = int(np.flatnonzero(tr.tau == 1.0)[0])
        err = abs(tr.unitary[i1] - tr.unitary[0])
        c.check(f"{tag} revival at tau=1 to 1e-8", err <= 1e-8, f"|A(1)-A(0)| = {err:.2e}")
        worst = 0.0
        for n in (1, 2, 3):
            i = int(np.flatnonzero(tr.tau == n)[0])
            height = (tr.decohered[i] - 1 / 3) / (tr.decohered[0] - 1 / 3)
            worst = max(worst, abs(height / math.exp(-tr.gamma * tr.t_seconds[i]) - 1))
        c.check(f"{tag} decohered peaks follow exp(-Gamma n T_rev) +- 1%", worst <= 0.01, f"worst {worst:.2e}")
        widths[T] = _peak_fwhm(tr.tau, tr.unitary, 1.0, plateau)
    ratio = widths[100e-6] / widths[1e-3]
    c.check("peak width ratio sqrt(10) +- 10%", within(ratio, math.sqrt(10), 0.10),
            f"{ratio:.4f} (FWHM {widths[100e-6]:.3e} / {widths[1e-3]:.3e} in tau)")
    c.finish()


@pytest.mark.slow
def test_criterion_4_property_suite(cnt_state_100uk, fig2_traces):
    c = Criterion(4, "signal properties")
    series = evolve.alignment_series(cnt_state_100uk)
    n = np.arange(0, 101, dtype=float)
    a0 = series(0.0)[0]
    err = np.abs(series(n) - a0).max()
    c.check("|A(n) - A(0)| <= 1e-10, n <= 100", err <= 1e-10, f"{err:.2e}")
    err = np.abs(series(n + 0.5) - (2 * series.diagonal - series(n))).max()
    c.check("A(n + 1/2) = 2D - A(n) to 1e-10", err <= 1e-10, f"{err:.2e}")
    tr = fig2_traces[100e-6]
    err = np.abs(tr.decohered - (tr.unitary * tr.envelope + (1 - tr.envelope) / 3)).max()
    c.check("decoherence envelope identity", err <= 1e-12, f"{err:.2e}")

    shear_dev = 0.0
    for T, tr in fig2_traces.items():
        shear = evolve.classical_shear_alignment(tr.initial_alignment, tr.kappa, tr.t_seconds)
        sel = (tr.tau < 0.5) & (shear >= 0.6)
        shear_dev = max(shear_dev, float(np.abs(shear[sel] - tr.unitary[sel]).max()))
    c.check("shear formula within 0.01 while it is >= 0.6", shear_dev <= 0.01, f"max |diff| {shear_dev:.4f}")

    free = rs.thermal_state(500.0, 0.0)
    err = np.abs(evolve.unitary_alignment(free, np.linspace(0, 1, 101)) - 1 / 3).max()
    c.check("free rotor alignment 1/3", err <= 1e-12, f"{err:.2e}")

    v0 = 1e5
    for ratio in (0.02, 0.05, 0.1):
        state = rs.thermal_state(ratio * v0, v0)
        exact = 1 - state.initial_alignment()
        approx = 1 - rs.alignment_asymptotic(ratio)
        rel = abs(approx / exact - 1)
        c.check(f"deep-trap formula at kT/V0 = {ratio}", rel <= 0.05, f"relative error of 1-A {rel:.2%}")
    c.finish()


@pytest.mark.slow
def test_criterion_5_semiclassical_vs_exact(cnt_state_1mk):
    c = Criterion(5, "semiclassical band against exact diagonalization (1 mK)")
    exact = cnt_state_1mk.band
    semi = rs.semiclassical_band(cnt_state_1mk.kT_over_b, cnt_state_1mk.v0_over_b, exact.j_max)
    for name in ("diag", "off"):
        a, b = getattr(exact, name), getattr(semi, name)
        rows = max(a.shape[0], b.shape[0])
        a = np.pad(a, ((0, rows - a.shape[0]), (0, 0)))
        b = np.pad(b, ((0, rows - b.shape[0]), (0, 0)))
        sel = np.abs(a) > 1e-6 * np.abs(a).max()
        rel = np.abs(b[sel] / a[sel] - 1)
        c.check(f"{name} elements within 2%", rel.max() <= 0.02,
                f"max rel {rel.max():.3g}; {np.mean(rel > 0.02):.1%} of {sel.sum()} elements above 2%")
    kt_rev = physcore.shear_rate(cnt_state_1mk.rotor, 1e-3) * physcore.revival_time(cnt_state_1mk.rotor)
    tau = evolve.TimeGrid(revivals=1.0, points=2001, refine=True).build(kt_rev)
    diff = np.abs(evolve.unitary_alignment(semi, tau) - evolve.unitary_alignment(exact, tau)).max()
    c.check("alignment traces within 0.01 over the first revival", diff <= 0.01, f"max |diff| {diff:.2e}")
    c.finish()


def test_criterion_6_macroscopicity():
    c = Criterion(6, "macroscopicity")
    tm = mc.theta_max()
    c.check("theta_m in [0.11, 0.13]", 0.11 <= tm.theta_m <= 0.13, f"{tm.theta_m:.6f} at x = {tm.x_star:.4f}")
    change = abs(mc.theta_max(2).theta_m - tm.theta_m)
    c.check("doubling quadrature changes theta_m < 1e-3", change < 1e-3, f"{change:.2e}")
    mu = mc.mu_bound(mc.MacroInputs.for_rotor(physcore.RotorSpec.from_amu(1e6, 50e-9), 10, 0.8))
    c.check("mu(1e6 amu, 50 nm, n=10, f=0.8) = 17.5 +- 0.1", abs(mu - 17.5) <= 0.1, f"{mu:.4f}")
    mu = mc.mu_bound(mc.MacroInputs.for_rotor(physcore.get_preset("TMV").rotor, 1, 0.8))
    c.check("mu(TMV, n=1, f=0.8) = 22.8 +- 0.2", abs(mu - 22.8) <= 0.2, f"{mu:.4f}")
    c.finish()


@pytest.mark.slow
def test_criterion_7_torque_sensing(small_state):
    c = Criterion(7, "torque sensing")
    taus = np.linspace(0.0, 2.0, 81)
    for n in (0.01, 0.03, 0.1):
        err = np.abs(ts.shell_alignment(small_state, n, taus) - dense_torque_alignment(8, 2.0, 10.0, n, taus)).max()
        c.check(f"(a) dense oracle, j_max = 8, N/B = {n}", err <= 1e-3, f"max |diff| {err:.3e}")

    sc = cli.build_scenario(cli.load_config(os.path.join(CONFIGS, "desk_torque.json")))
    state = rs.prepare_exact(sc.rotor, sc.trap, sc.temperature, sc.truncation)
    nonzero = [x for x in sc.torques if x > 0]
    rows = ts.revival_decay_sweep(state, sc.revival_index, sc.torques, rotor=sc.rotor, check_monotone=False)
    heights = [r.revival_alignment for r in rows]
    monotone = all(b <= a + ts.MONOTONICITY_NOISE for a, b in zip(heights, heights[1:]))
    decade = max(nonzero) / min(nonzero) >= 10
    c.check(f"(b) monotone decay at n = {sc.revival_index}, j_max = {state.j_max}",
            monotone and decade and heights[-1] < heights[0],
            " > ".join(f"{h:.6f}" for h in heights))

    if os.environ.get("NANOREVIVAL_FULLSCALE") == "1":
        cnt = physcore.get_preset("CNT").rotor
        full = rs.prepare_exact(cnt, physcore.TrapSpec(5.0, 30e-6, depth_override=conftest.FIG2_DEPTH), 100e-6)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            free, pushed = (ts.shell_alignment(full, physcore.energy_over_b(cnt, x), [10.0])[0] for x in (0.0, 7e-31))
        c.check("(c) full-scale tenth revival at 7e-31 N m reduced but nonzero",
                1 / 3 < pushed < free, f"{pushed:.6f} vs {free:.6f}")
    else:
        c.note("(c) full-scale run: set NANOREVIVAL_FULLSCALE=1")
    c.finish()


def test_criterion_8_thread_determinism(tmp_path, capsys):
    c = Criterion(8, "byte-identical CSV bodies across thread counts")
    counts = sorted({1, 4, os.cpu_count() or 1})
    for command, config in (("simulate", "cnt_quick.json"), ("torque", "desk_torque.json")):
        bodies = []
        for k in counts:
            out = tmp_path / f"{command}_{k}.csv"
            code = cli.main([command, "--config", os.path.join(CONFIGS, config), "--out", str(out),
                             "--threads", str(k)])
            capsys.readouterr()
            assert code == 0
            bodies.append("\n".join(l for l in out.read_text().splitlines() if not l.startswith("#")))
        c.check(f"{command} {config}, threads {counts}", len(set(bodies)) == 1,
                f"{len(set(bodies))} distinct bodies")
    c.finish()
