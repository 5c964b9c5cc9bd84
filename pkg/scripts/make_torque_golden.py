"""Regenerate tests/data/small_torque_golden.csv.

The golden values come from the per-eigenstate reference propagation, an
independent code path from the banded shell contraction used by the CLI.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from nanorevival import physcore, rotorstate, torquesense
from nanorevival.cli import build_scenario, load_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "configs" / "small_torque_regression.json")
    ap.add_argument("--out", default=ROOT / "tests" / "data" / "small_torque_golden.csv")
    args = ap.parse_args()

    sc = build_scenario(load_config(args.config))
    state = rotorstate.prepare_exact(sc.rotor, sc.trap, sc.temperature, sc.truncation,
                                     keep_vectors=True)
    lines = ["next_Nm,revival_alignment"]
    for torque in sorted(sc.torques):
        n_b = physcore.energy_over_b(sc.rotor, torque)
        value = torquesense.eigenstate_alignment(state, n_b, [float(sc.revival_index)])[0]
        lines.append(f"{float(torque)!r},{float(value)!r}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
