"""Command-line front end.

    nanorevival preset list | show NAME
    nanorevival simulate --config cfg.json --out trace.csv [--no-decoherence] [--classical-only]
    nanorevival torque   --config cfg.json --out sweep.csv
    nanorevival macro    --mass-amu 1e6 --length-nm 50 --revival-n 10 --visibility-f 0.8
    nanorevival rates    --config cfg.json

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import __version__, decorates, evolve, macroscopicity, physcore, rotorstate, torquesense
from .constants import CONSTANT_SET, K_B
from .errors import NanorevivalError, ValidationError

log = logging.getLogger("nanorevival")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

_DEFAULT_POWER = 5.0
_DEFAULT_WAIST_UM = 30.0


def load_schema() -> dict:
    text = resources.files("nanorevival").joinpath("config_schema.json").read_text()
    return json.loads(text)


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form of a config."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            config = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
    validate_config(config)
    return config


def validate_config(config: dict) -> None:
    try:
        jsonschema.validate(config, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"config invalid at {where}: {exc.message}") from None


@dataclass
class Scenario:
    """Library objects built from a validated config."""

    rotor: physcore.RotorSpec
    trap: physcore.TrapSpec
    temperature: float
    method: str
    truncation: rotorstate.BasisTruncation
    grid: evolve.TimeGrid
    environment: decorates.EnvironmentSpec
    torques: list
    revival_index: int


def build_scenario(config: dict) -> Scenario:
    part = config["particle"]
    if "preset" in part:
        preset = physcore.get_preset(part["preset"])
        rotor, trap = preset.rotor, preset.trap
        mass_amu = part.get("mass_amu", rotor.mass_amu)
        length = part.get("length_nm", rotor.length * 1e9) * 1e-9
        deff = part.get("deff_nm", rotor.effective_diameter * 1e9) * 1e-9
        alpha = part.get("delta_alpha", rotor.polarizability_anisotropy)
        name = preset.name
    else:
        trap = None
        mass_amu, length = part["mass_amu"], part["length_nm"] * 1e-9
        deff = part.get("deff_nm", 0.0) * 1e-9
        alpha = part.get("delta_alpha")
        name = config.get("name", "custom")
    rotor = physcore.RotorSpec.from_amu(mass_amu, length, effective_diameter=deff,
                                        polarizability_anisotropy=alpha, name=name)
    tcfg = config.get("trap", {})
    power = tcfg.get("power_W", trap.power if trap else _DEFAULT_POWER)
    waist = tcfg.get("waist_um", trap.waist * 1e6 if trap else _DEFAULT_WAIST_UM) * 1e-6
    trap = physcore.TrapSpec(power, waist, part.get("depth_override_J"))

    scfg = config["state"]
    truncation = rotorstate.BasisTruncation(
        j_max=scfg.get("jmax_override"),
        tail_epsilon=scfg.get("tail_epsilon", rotorstate.DEFAULT_TAIL_EPSILON),
    )
    ecfg = config.get("evolution", {})
    grid = evolve.TimeGrid(revivals=ecfg.get("revivals", 3.0), points=ecfg.get("points", 3001),
                           refine=ecfg.get("refine_revivals", False))
    gcfg = config.get("environment", {})
    env = decorates.EnvironmentSpec.from_mbar(
        gcfg.get("pressure_mbar", 0.0),
        gcfg.get("gas_mass_amu", decorates.N2_MASS_AMU),
        gcfg.get("gas_temperature_K", decorates.ROOM_TEMPERATURE),
        gcfg.get("emission_rate_hz", 0.0),
    )
    qcfg = config.get("torque", {})
    return Scenario(rotor, trap, scfg["temperature_K"], scfg.get("method", "exact"), truncation,
                    grid, env, list(qcfg.get("next_Nm_list", [])), qcfg.get("revival_index", 10))


def format_float(x: float) -> str:
    """Shortest round-trip decimal form (locale independent)."""
    return repr(float(x))


def write_csv(path, columns: dict, manifest: dict) -> None:
    names = list(columns)
    data = [np.asarray(columns[k], dtype=float) for k in names]
    lines = [f"# {k}: {v}" for k, v in manifest.items()]
    lines.append(",".join(names))
    for row in zip(*data):
        lines.append(",".join(format_float(x) for x in row))
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _manifest(config: dict, command: str, started: float, j_max) -> dict:
    return {
        "command": command,
        "config_sha256": config_hash(config),
        "version": __version__,
        "constants": CONSTANT_SET,
        "j_max": j_max if j_max is not None else "n/a",
        "wall_time_s": f"{time.perf_counter() - started:.3f}",
    }


def _prepare_state(sc: Scenario, threads, cache_dir):
    if sc.method == "semiclassical":
        band = rotorstate.prepare_semiclassical(sc.rotor, sc.trap, sc.temperature, sc.truncation)
        return band, band.j_max
    state = rotorstate.prepare_exact(sc.rotor, sc.trap, sc.temperature, sc.truncation,
                                     threads=threads, cache_dir=cache_dir)
    return state, state.j_max


def cmd_preset(args) -> int:
    if args.action == "list":
        for name, p in sorted(physcore.PRESETS.items()):
            print(f"{name:5s} {p.description}")
        return EXIT_OK
    if not args.name:
        raise ValidationError("preset show needs a NAME")
    p = physcore.get_preset(args.name)
    r = p.rotor
    info = {
        "name": p.name,
        "description": p.description,
        "mass_amu": r.mass_amu,
        "length_nm": r.length * 1e9,
        "deff_nm": r.effective_diameter * 1e9,
        "moment_of_inertia_kg_m2": physcore.moment_of_inertia(r),
        "T_rev_ms": physcore.revival_time(r) * 1e3,
    }
    if p.temperature is not None:
        info["temperature_K"] = p.temperature
        info["mean_j"] = physcore.mean_j(r, p.temperature)
    if p.trap is not None:
        info["trap"] = {"power_W": p.trap.power, "waist_um": p.trap.waist * 1e6}
    print(json.dumps(info, indent=2))
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    config = load_config(args.config)
    sc = build_scenario(config)
    if args.no_decoherence:
        gamma = 0.0
    else:
        gamma = decorates.decoherence_rate(sc.rotor, sc.environment)
    t_rev = physcore.revival_time(sc.rotor)
    kappa = physcore.shear_rate(sc.rotor, sc.temperature)
    if args.classical_only:
        a0 = rotorstate.classical_alignment(physcore.trap_depth(sc.rotor, sc.trap) / (K_B * sc.temperature))
        tau = sc.grid.build(kappa * t_rev)
        t = tau * t_rev
        classical = evolve.decohered_alignment(evolve.classical_shear_alignment(a0, kappa, t), gamma, t)
        columns = {"tau": tau, "t_seconds": t, "alignment_classical": classical,
                   "envelope": np.exp(-gamma * t)}
        write_csv(args.out, columns, _manifest(config, "simulate --classical-only", started, None))
        return EXIT_OK
    state, j_max = _prepare_state(sc, args.threads, args.cache_dir)
    tr = evolve.trace(state, grid=sc.grid, rotor=sc.rotor, temperature=sc.temperature, gamma=gamma)
    write_csv(args.out, tr.columns(), _manifest(config, "simulate", started, j_max))
    return EXIT_OK


def cmd_torque(args) -> int:
    started = time.perf_counter()
    config = load_config(args.config)
    if "torque" not in config:
        raise ValidationError("torque command needs a 'torque' block in the config")
    sc = build_scenario(config)
    state, j_max = _prepare_state(sc, args.threads, args.cache_dir)
    torques = sorted(float(x) for x in sc.torques)
    if torques and torques[-1] > torquesense.PERTURBATIVE_LIMIT * K_B * sc.temperature:
        log.warning("largest torque exceeds %.1f kT; shell-conserving propagation may be inaccurate",
                    torquesense.PERTURBATIVE_LIMIT)
    workers = rotorstate.resolve_threads(args.threads)

    def one(torque):
        n_b = physcore.energy_over_b(sc.rotor, torque)
        return n_b, float(torquesense.shell_alignment(state, n_b, [float(sc.revival_index)])[0])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, torques))
    heights = [a for _, a in results]
    for lo, hi, a, b in zip(torques, torques[1:], heights, heights[1:]):
        if b > a + torquesense.MONOTONICITY_NOISE:
            raise torquesense.MonotonicityError(
                f"revival height rises between N={lo:g} and N={hi:g} N m")
    columns = {
        "next_Nm": torques,
        "next_over_B": [n for n, _ in results],
        "revival_alignment": heights,
    }
    manifest = _manifest(config, "torque", started, j_max)
    manifest["revival_index"] = sc.revival_index
    write_csv(args.out, columns, manifest)
    return EXIT_OK


def cmd_macro(args) -> int:
    rotor = physcore.RotorSpec.from_amu(args.mass_amu, args.length_nm * 1e-9)
    inputs = macroscopicity.MacroInputs.for_rotor(rotor, args.revival_n, args.visibility_f)
    tm = macroscopicity.theta_max()
    out = {
        "T_rev_s": inputs.revival_time,
        "theta_m": tm.theta_m,
        "x_star": tm.x_star,
        "mu": macroscopicity.mu_bound(inputs),
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_rates(args) -> int:
    config = load_config(args.config)
    sc = build_scenario(config)
    gas = decorates.gas_rate(sc.rotor, sc.environment)
    total = decorates.total_rate(sc.environment, gas)
    out = {
        "gamma_gas": gas,
        "gamma_total": total,
        "one_over_gamma": (1.0 / total) if total > 0 else math.inf,
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nanorevival",
                                 description="Orientational revival simulations for nanorotors")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preset", help="list or show built-in particles")
    p.add_argument("action", choices=["list", "show"])
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_preset)

    def add_run_opts(p):
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", default="-", help="CSV output path ('-' for stdout)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $NANOREVIVAL_THREADS or all cores)")
        p.add_argument("--cache-dir", default=None, help="directory for cached thermal states")

    p = sub.add_parser("simulate", help="alignment trace of a released thermal state")
    add_run_opts(p)
    p.add_argument("--no-decoherence", action="store_true", help="force the decoherence rate to 0")
    p.add_argument("--classical-only", action="store_true", help="emit only the classical channel")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("torque", help="revival height versus external torque")
    add_run_opts(p)
    p.set_defaults(func=cmd_torque)

    p = sub.add_parser("macro", help="macroscopicity bound of a revival observation")
    p.add_argument("--mass-amu", type=float, required=True)
    p.add_argument("--length-nm", type=float, required=True)
    p.add_argument("--revival-n", type=int, required=True)
    p.add_argument("--visibility-f", type=float, required=True)
    p.set_defaults(func=cmd_macro)

    p = sub.add_parser("rates", help="decoherence rates of a scenario")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_rates)
    return ap


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NanorevivalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
