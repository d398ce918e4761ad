"""Reproduce the visibility-threshold table with level-2 relaxations.

Each row runs a symmetric angle search (one settings list shared by all
parties) and refines the best angles by bisection.  Results are written as
JSON, one object per row, so long runs can be resumed row by row.

    python scripts/table1.py --rows ghz2 ghz3 w2 --out table1.json
    python scripts/table1.py --rows w3 --restarts 2 --max-evals 120 --out w3.json
"""
from __future__ import annotations

import argparse
import json
import logging
import time
from pathlib import Path


from diew import quantum as qm
from diew import witness as wt
from diew.cli import _angles_of
from diew.scenario import Scenario
from diew.search import AngleVector, SearchConfig, minimize_threshold

ROWS = {
    # name: (state, settings, mode, start preset)
    "ghz2": ("ghz", 2, "equatorial", "mermin-xy"),
    "ghz3": ("ghz", 3, "equatorial", "reference"),
    "w2": ("w", 2, "full_bloch", None),
    "w3": ("w", 3, "full_bloch", None),
}
REFERENCE = {"ghz2": 0.7071, "ghz3": 0.6667, "w2": 0.7500, "w3": 0.7158}


def start_angles(preset: str | None, start_file: str | None) -> AngleVector | None:
    if start_file:
        return AngleVector.load(start_file)
    if preset == "mermin-xy":
        return AngleVector(_angles_of(wt.mermin_xy_settings()))
    if preset == "reference":
        return AngleVector(_angles_of(wt.reference_ghz_settings(3)))
    return None


def run_row(name: str, args) -> dict:
    kind, m, mode, preset = ROWS[name]
    state = qm.ghz_state(3) if kind == "ghz" else qm.w_state()
    cfg = SearchConfig(restarts=args.restarts, max_evals=args.max_evals, seed=args.seed, mode=mode,
                       symmetric=True, min_step=args.min_step, threads=args.threads)
    t0 = time.perf_counter()
    res = minimize_threshold(state, Scenario(3, m), args.level, cfg,
                             x0=start_angles(preset, args.start), tol_v=args.tol_v)
    out = {"row": name, "reference": REFERENCE[name], "level": args.level,
           "config": {k: v for k, v in vars(cfg).items()}, "seconds": time.perf_counter() - t0}
    out.update(res.to_dict())
    return out


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", nargs="+", choices=sorted(ROWS), default=["ghz2", "ghz3", "w2"])
    p.add_argument("--level", type=int, default=2)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--max-evals", type=int, default=400)
    p.add_argument("--min-step", type=float, default=1e-3)
    p.add_argument("--tol-v", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--start", help="angles JSON used as the first restart's starting point")
    p.add_argument("--out", default="table1.json")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    path = Path(args.out)
    results = json.loads(path.read_text()) if path.exists() else {}
    for name in args.rows:
        row = run_row(name, args)
        results[name] = row
        path.write_text(json.dumps(results, indent=2, default=float))
        thr = row["threshold"]
        print(f"{name}: V_min = {thr['value']:.4f} in [{thr['lower']:.4f}, {thr['upper']:.4f}]"
              f"  (reference {row['reference']:.4f}, {row['evaluations']} evaluations,"
              f" {row['seconds']:.0f} s)", flush=True)


if __name__ == "__main__":
    main()
