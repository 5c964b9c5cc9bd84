"""Reduce a simulate CSV to figure-ready data.

Writes the unitary, decohered and classical channels in milliseconds plus a
small table of revival peak heights at integer tau.
"""

from __future__ import annotations

import argparse
import csv
import json
from pathlib import Path

import numpy as np


def read_trace(path):
    manifest, rows = {}, []
    with open(path) as fh:
        body = []
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                manifest[key.strip()] = value.strip()
            else:
                body.append(line)
    reader = csv.DictReader(body)
    for row in reader:
        rows.append({k: float(v) for k, v in row.items()})
    cols = {k: np.array([r[k] for r in rows]) for k in reader.fieldnames}
    return manifest, cols


def main():
    ap = argparse.ArgumentParser(description="Convert a trace CSV into figure data")
    ap.add_argument("trace")
    ap.add_argument("--out-dir", default="figure_data")
    args = ap.parse_args()

    manifest, cols = read_trace(args.trace)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    t_ms = cols["t_seconds"] * 1e3
    names = [k for k in ("alignment_unitary", "alignment_decohered", "alignment_classical") if k in cols]
    np.savetxt(out / "signal.dat", np.column_stack([t_ms] + [cols[k] for k in names]),
               header="t_ms " + " ".join(names))

    peaks = []
    tau = cols["tau"]
    for n in range(0, int(np.floor(tau.max())) + 1):
        i = int(np.argmin(np.abs(tau - n)))
        if abs(tau[i] - n) < 1e-9:
            peaks.append({"n": n, **{k: float(cols[k][i]) for k in names}})
    (out / "peaks.json").write_text(json.dumps({"manifest": manifest, "peaks": peaks}, indent=2))
    print(f"wrote {out / 'signal.dat'} and {out / 'peaks.json'}")


if __name__ == "__main__":
    main()
