"""Command-line interface.

Exit codes: 0 member / success, 1 certified non-member, 2 malformed input or
I/O error, 3 scenario mismatch, 4 indeterminate solver verdict, 5 size guard
exceeded.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path

import numpy as np

from . import bisep_sdp as sdp
from . import lhv
from . import polytope as pl
from . import quantum as qm
from . import search as se
from . import witness as wt
from .scenario import Behavior, Scenario, ScenarioError, correlators_from_behavior, load_behavior

log = logging.getLogger("diew")

EXIT_OK, EXIT_NON_MEMBER, EXIT_INPUT, EXIT_MISMATCH, EXIT_INDETERMINATE, EXIT_GUARD = range(6)


class InputError(Exception):
    """Malformed or unreadable input (exit 2)."""


class MismatchError(Exception):
    """Inputs from different scenarios (exit 3)."""


def fmt(x: float) -> str:
    return f"{x:.10g}"


# -- state and angle presets -------------------------------------------------------

def parse_state(spec: str) -> qm.DensityMatrix:
    """``ghz:n``, ``w``, ``ghz3:qutrit`` or ``ghz0:n`` (GHZ_{n-1} with a |0> party)."""
    try:
        if spec == "w":
            return qm.w_state()
        if spec == "ghz3:qutrit":
            return qm.ghz_state(3, local_dim=3)
        kind, _, arg = spec.partition(":")
        if kind == "ghz":
            return qm.ghz_state(int(arg))
        if kind == "ghz0":
            return wt.tight_bisep_construction(int(arg))[0]
    except ValueError as exc:
        raise InputError(f"bad state specifier {spec!r}: {exc}") from exc
    raise InputError(f"unknown state specifier {spec!r}")


ANGLE_PRESETS = ("reference", "mermin-xy", "svetlichny-xy", "tight-bisep")
#: older spelling of the "reference" preset, still accepted
_PRESET_ALIASES = {"paper": "reference"}


def parse_angles(spec: str, state: qm.DensityMatrix) -> qm.MeasurementAssignment:
    n = state.n_parties
    spec = _PRESET_ALIASES.get(spec, spec)
    if spec == "reference":
        if state.local_dims == (3, 3, 3):
            return wt.qutrit_example()[1]
        return wt.reference_ghz_settings(n)
    if spec == "mermin-xy":
        return wt.mermin_xy_settings()
    if spec == "svetlichny-xy":
        return wt.svetlichny_xy_settings()
    if spec == "tight-bisep":
        return wt.tight_bisep_construction(n)[1]
    path = Path(spec)
    if not path.exists():
        raise InputError(f"unknown angle preset or missing file {spec!r}; presets: {ANGLE_PRESETS}")
    try:
        return se.AngleVector.load(path).measurements()
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"malformed angles file {spec}: {exc}") from exc


def behavior_from_args(args) -> Behavior:
    if getattr(args, "behavior", None):
        try:
            return load_behavior(args.behavior)
        except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read behavior {args.behavior}: {exc}") from exc
    if not getattr(args, "state", None) or not getattr(args, "angles", None):
        raise InputError("give --behavior FILE or both --state and --angles")
    state = parse_state(args.state)
    meas = parse_angles(args.angles, state)
    if meas.local_dims != state.local_dims:
        raise MismatchError(f"measurements act on {meas.local_dims}, state on {state.local_dims}")
    if not 0.0 <= args.visibility <= 1.0:
        raise InputError("visibility must lie in [0, 1]")
    return qm.born_behavior(qm.noisy(state, args.visibility), meas)


def witness_from_args(spec: str | None, b: Behavior) -> wt.WitnessCoefficients:
    if spec is None:
        spec = "mermin" if b.scenario.m_settings == 2 else f"I{b.n}"
    if spec == "mermin":
        return wt.mermin_witness()
    if spec.startswith("I") and spec[1:].isdigit():
        return wt.build_In(int(spec[1:]))
    try:
        return wt.load_witness(spec)
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read witness {spec}: {exc}") from exc


# -- manifest ----------------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    parameters: dict
    seeds: list
    version: str
    wall_time: float
    output_digests: dict

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


class Output:
    """Collects primary output so the manifest can digest it."""

    def __init__(self, path: str | None = None):
        self.path = path
        self.parts: list[str] = []

    def write(self, text: str) -> None:
        if not text.endswith("\n"):
            text += "\n"
        self.parts.append(text)

    def flush(self) -> str:
        text = "".join(self.parts)
        if self.path:
            try:
                Path(self.path).write_text(text)
            except OSError as exc:
                raise InputError(f"cannot write {self.path}: {exc}") from exc
        else:
            sys.stdout.write(text)
        return text


# -- commands ------------------------------------------------------------------------

def cmd_witness_eval(args, out: Output) -> int:
    b = behavior_from_args(args)
    w = witness_from_args(args.witness, b)
    if w.scenario != b.scenario:
        raise MismatchError(f"witness scenario {w.scenario} differs from behavior scenario {b.scenario}")
    value = wt.evaluate(w, correlators_from_behavior(b))
    bounds = dict(w.bounds)
    if bounds.get("local") is None and w.is_full_correlator:
        try:
            bounds["local"] = pl.local_bound(w)
        except pl.GuardExceededError:
            pass
    out.write(f"value: {fmt(value)}")
    for name in wt.BOUND_NAMES:
        if bounds.get(name) is not None:
            out.write(f"bound {name}: {fmt(bounds[name])}")
    for name in ("local", "biseparable", "svetlichny"):
        if bounds.get(name) is not None:
            verdict = "yes" if value > bounds[name] + 1e-9 else "no"
            out.write(f"violates {name}: {verdict}")
    return EXIT_OK


def _load_dirs(path: str) -> lhv.MeasurementDirections:
    try:
        av = se.AngleVector.load(path)
        return lhv.MeasurementDirections(av.angles)
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read directions {path}: {exc}") from exc


def cmd_lhv(args, out: Output) -> int:
    dirs = _load_dirs(args.dirs)
    analytic = lhv.analytic_correlators(dirs)
    if args.lhv_command == "analytic":
        out.write(lhv.correlators_csv(analytic))
        return EXIT_OK
    if args.rounds < 1:
        raise InputError("--rounds must be >= 1")
    mc = lhv.monte_carlo_correlators(dirs, args.rounds, args.seed)
    out.write(lhv.correlators_csv(analytic, mc))
    return EXIT_OK


def cmd_certify(args, out: Output) -> int:
    b = behavior_from_args(args)
    if args.model == "bisep":
        if b.n != 3:
            raise MismatchError("the biseparability hierarchy needs three parties")
        backend = sdp.CvxpyBackend(args.solver)
        res = sdp.membership(b, args.level, backend, certificate=True, symmetric=args.symmetric)
        out.write(json.dumps(res.to_dict(), indent=2))
        return {"feasible_at_level": EXIT_OK, "infeasible": EXIT_NON_MEMBER}.get(res.status, EXIT_INDETERMINATE)
    res = pl.lp_membership(b, args.model)
    out.write(json.dumps(res.to_dict(), indent=2))
    return EXIT_OK if res.member else EXIT_NON_MEMBER


def cmd_table1(args, out: Output) -> int:
    m = args.settings
    if args.state == "ghz":
        state = qm.ghz_state(3)
        start = wt.reference_ghz_settings(3) if m == 3 else wt.mermin_xy_settings()
        mode = "equatorial"
    else:
        state = qm.w_state()
        start, mode = None, "full_bloch"
    cfg = se.SearchConfig(restarts=args.restarts, max_evals=args.max_evals, seed=args.seed, mode=mode,
                          symmetric=True, min_step=args.min_step, threads=args.threads)
    x0 = None
    if start is not None:
        x0 = se.AngleVector(_angles_of(start))
    res = se.minimize_threshold(state, Scenario(3, m), args.level, cfg, x0=x0, tol_v=args.tol_v,
                                solver=args.solver)
    thr = res.threshold
    out.write(f"state: {args.state}  settings: {m}  level: {args.level}")
    out.write(f"V_min: {fmt(thr.value)}  bracket: [{fmt(thr.lower)}, {fmt(thr.upper)}]")
    out.write(f"search robustness: {fmt(res.robustness)}  evaluations: {res.search.evaluations}"
              f"  failed trials: {res.search.failures}")
    out.write("angles (theta, phi) per party and setting:")
    for i, party in enumerate(res.angles.reduced()):
        out.write(f"  party {i + 1}: " + "; ".join(f"({fmt(t)}, {fmt(p)})" for t, p in party))
    if args.angles_out:
        res.angles.save(args.angles_out)
    if args.trace_out:
        Path(args.trace_out).write_text(res.search.trace_csv())
    return EXIT_OK


def _angles_of(meas: qm.MeasurementAssignment) -> np.ndarray:
    """Bloch angles of qubit observables ``n . sigma``."""
    out = np.zeros((meas.n_parties, meas.m_settings, 2))
    for i in range(meas.n_parties):
        for x in range(meas.m_settings):
            o = meas.observable(i, x)
            nx, ny, nz = np.real(o[0, 1]), -np.imag(o[0, 1]), np.real(o[0, 0])
            out[i, x] = np.arccos(np.clip(nz, -1, 1)), np.arctan2(ny, nx)
    return out


# -- parser ----------------------------------------------------------------------------

def _add_behavior_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--behavior", help="behavior JSON file")
    p.add_argument("--state", help="ghz:n, w, ghz3:qutrit or ghz0:n")
    p.add_argument("--angles", help=f"preset ({', '.join(ANGLE_PRESETS)}) or angles JSON file")
    p.add_argument("--visibility", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diew", description="Device-independent entanglement witnesses")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--manifest", help="write the run manifest here instead of stderr")
    parser.add_argument("--out", help="write primary output to this file")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    w = sub.add_parser("witness").add_subparsers(dest="witness_command", required=True)
    ev = w.add_parser("eval", help="evaluate a witness")
    ev.add_argument("--witness", help="witness JSON file, 'mermin' or 'I<n>' (default by scenario)")
    _add_behavior_source(ev)

    lh = sub.add_parser("lhv").add_subparsers(dest="lhv_command", required=True)
    simulate = lh.add_parser("simulate")
    simulate.add_argument("--dirs", required=True)
    simulate.add_argument("--rounds", type=int, required=True)
    simulate.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    analytic = lh.add_parser("analytic")
    analytic.add_argument("--dirs", required=True)

    cert = sub.add_parser("certify").add_subparsers(dest="model", required=True)
    for name in ("bisep", "svetlichny", "local"):
        c = cert.add_parser(name)
        _add_behavior_source(c)
        if name == "bisep":
            c.add_argument("--level", type=int, default=2)
            c.add_argument("--symmetric", action="store_true",
                           help="single-block program for permutation-invariant behaviors")
            c.add_argument("--solver", default=None)

    t1 = sub.add_parser("table1")
    t1.add_argument("--state", choices=("ghz", "w"), required=True)
    t1.add_argument("--settings", type=int, choices=(2, 3), required=True)
    t1.add_argument("--level", type=int, default=2)
    t1.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    t1.add_argument("--restarts", type=int, default=4)
    t1.add_argument("--max-evals", type=int, default=400)
    t1.add_argument("--min-step", type=float, default=1e-3)
    t1.add_argument("--tol-v", type=float, default=1e-3)
    t1.add_argument("--solver", default=None)
    t1.add_argument("--angles-out")
    t1.add_argument("--trace-out")
    return parser


COMMANDS = {"witness": cmd_witness_eval, "lhv": cmd_lhv, "certify": cmd_certify, "table1": cmd_table1}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    np.random.seed(args.seed)          # only third-party code reads the legacy global state
    out = Output(args.out)
    start = time.perf_counter()
    try:
        code = COMMANDS[args.command](args, out)
        text = out.flush()
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (MismatchError, ScenarioError) as exc:
        print(f"scenario mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (pl.GuardExceededError, pl.UnsupportedRepresentationError) as exc:
        print(f"guard exceeded: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (sdp.IndeterminateError, sdp.MonotonicityError) as exc:
        print(f"indeterminate: {exc}", file=sys.stderr)
        return EXIT_INDETERMINATE
    params = {k: v for k, v in vars(args).items() if k not in ("manifest", "log_level")}
    manifest = RunManifest(" ".join(str(params.get(k)) for k in ("command", "witness_command", "lhv_command",
                                                                   "model") if params.get(k)),
                           params, [args.seed], _version(), time.perf_counter() - start,
                           {"output": _digest(text)})
    blob = json.dumps(manifest.to_dict(), default=str)
    if args.manifest:
        Path(args.manifest).write_text(blob + "\n")
    else:
        print(f"manifest: {blob}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
