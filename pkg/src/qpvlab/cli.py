"""Command-line front end: sweeps, exact searches, verification,
combinatorics, and reporting with reproducible artifacts."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, asdict, field

import numpy as np

from . import approx_search, errmodel, exact_search, graphs, qcore

STORE_UNITARITY_TOL = 1e-8
STORE_OBJECTIVE_TOL = 1e-10

_ANGLE_RE = re.compile(r"^(?P<num>\d+)?\s*pi\s*(?:/\s*(?P<den>\d+))?$")


class UsageError(ValueError):
    """Bad flag combination or malformed argument (exit code 2)."""


def parse_angle(text):
    """Angles as rational multiples of pi ("3pi/8", "pi/4") or radians."""
    s = text.strip().lower().replace(" ", "")
    m = _ANGLE_RE.match(s)
    if m:
        num = int(m.group("num") or 1)
        den = int(m.group("den") or 1)
        if den == 0:
            raise UsageError(f"zero denominator in angle {text!r}")
        return num * math.pi / den
    try:
        return float(s)
    except ValueError:
        raise UsageError(f"cannot parse angle {text!r}") from None


@dataclass
class RunConfig:
    """Everything needed to reproduce a run; serialized into artifacts."""

    command: str
    d: int = 0
    theta: float = None
    theta_text: str = None
    grid: int = None
    n: int = None
    k: int = None
    restarts: int = None
    seed: int = 0
    mode: str = "real"
    kind: str = "cayley"
    threads: int = 1
    out: str = None
    store: str = None
    found_threshold: float = exact_search.FOUND_THRESHOLD

    def header_items(self):
        for key, value in asdict(self).items():
            if value is not None:
                yield key, value

    def digest(self):
        payload = json.dumps(dict(self.header_items()), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


# -- solution store -----------------------------------------------------------

class StoreVerificationError(RuntimeError):
    def __init__(self, path, index, reasons):
        self.index = index
        self.reasons = reasons
        super().__init__(
            f"store record {index} in {path} fails verification: "
            + "; ".join(reasons)
        )


def _matrix_to_json(m):
    m = np.asarray(m)
    return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}


def _matrix_from_json(obj):
    return np.array(obj["re"]) + 1j * np.array(obj["im"])


class SolutionStore:
    """Append-only JSON-lines store of exact attacks; every record is
    re-verified when loaded."""

    def __init__(self, path):
        self.path = path

    def load(self, verify=True):
        records = []
        try:
            with open(self.path) as fh:
                lines = [ln for ln in fh if ln.strip()]
        except FileNotFoundError:
            return records
        for idx, line in enumerate(lines):
            record = json.loads(line)
            if verify:
                reasons = self.verify_record(record)
                if reasons:
                    raise StoreVerificationError(self.path, idx, reasons)
            records.append(record)
        return records

    def append(self, record):
        with open(self.path, "a") as fh:
            fh.write(json.dumps(record) + "\n")

    @staticmethod
    def verify_record(record):
        reasons = []
        d = record["d"]
        theta = record["theta"]
        u = _matrix_from_json(record["U"])
        v = _matrix_from_json(record["V"])
        for name, m in (("U", u), ("V", v)):
            defect = qcore.unitarity_defect(m)
            if defect > STORE_UNITARITY_TOL:
                reasons.append(f"{name} unitarity defect {defect:.3e}")
        system = exact_search.build_residuals(d, theta, record["mode"])
        f = exact_search.sum_of_squares(system, system.pack(u, v))
        if abs(f - record["F"]) > STORE_OBJECTIVE_TOL:
            reasons.append(
                f"stated F {record['F']:.3e} but recomputed {f:.3e}"
            )
        return reasons


def _store_record(config, result):
    strategy = result.strategy
    return {
        "d": result.d,
        "theta": result.theta,
        "theta_text": config.theta_text,
        "mode": result.mode,
        "F": result.best_f_projected,
        "U": _matrix_to_json(strategy.u),
        "V": _matrix_to_json(strategy.v),
        "seed": config.seed,
        "config": config.digest(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }


# -- output helpers -----------------------------------------------------------

def _write_csv(path, config, rows, columns):
    with open(path, "w", newline="") as fh:
        for key, value in config.header_items():
            fh.write(f"# {key}={value}\n")
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _emit_report(report, out):
    text = json.dumps(report, indent=2, default=float)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# -- subcommands --------------------------------------------------------------

def cmd_sweep(args):
    config = RunConfig(
        command="sweep", d=args.d, grid=args.grid, restarts=args.restarts,
        seed=args.seed, mode=args.mode, kind=args.kind, out=args.out,
        threads=args.threads,
    )
    thetas = np.linspace(0.0, math.pi / 4, args.grid)
    sweep = approx_search.sweep_theta(
        args.d, thetas,
        approx_search.ApproxConfig(
            restarts=args.restarts, seed=args.seed, mode=args.mode,
            kind=args.kind,
        ),
        warm_start=not args.no_warm_start,
    )
    rows = list(sweep.to_rows())
    out = args.out or f"sweep_d{args.d}.csv"
    _write_csv(out, config, rows,
               ["theta", "p_err", "d", "restarts", "seed", "warm_start"])
    best = max(rows, key=lambda r: r["p_err"])
    zeros = [r["theta"] for r in rows if r["p_err"] < 1e-8]
    print(f"wrote {out}: {len(rows)} rows")
    print(f"max p_err = {best['p_err']:.6g} at theta = {best['theta']:.6g}")
    print(f"zeros (p_err < 1e-8) at theta = {zeros}")
    return 0


def cmd_exact(args):
    theta = parse_angle(args.theta)
    folded = exact_search.fold_theta(theta)
    config = RunConfig(
        command="exact", d=args.d, theta=folded, theta_text=args.theta,
        restarts=args.restarts, seed=args.seed, mode=args.mode,
        store=args.store, out=args.out, threads=args.threads,
    )
    result = exact_search.least_squares_search(
        args.d, folded,
        exact_search.ExactSearchConfig(
            restarts=args.restarts, mode=args.mode, seed=args.seed,
            stop_on_found=not args.exhaustive,
        ),
    )
    verdict = "FOUND" if result.found else "NOT-FOUND"
    print(f"{verdict} d={args.d} theta={args.theta} (folded {folded:.6g}) "
          f"F={result.best_f_projected:.3e} "
          f"restarts_used={result.restarts_used}")
    if result.found and args.store:
        store = SolutionStore(args.store)
        store.load()  # abort early if the store is corrupted
        store.append(_store_record(config, result))
        print(f"appended solution to {args.store}")
    if args.out:
        _emit_report(
            {
                "found": result.found,
                "d": result.d,
                "theta": result.theta,
                "F": result.best_f_projected,
                "restarts_used": result.restarts_used,
                "config": dict(config.header_items()),
            },
            args.out,
        )
    return 0


def cmd_classify(args):
    config = RunConfig(
        command="classify", d=args.d, k=args.k, restarts=args.restarts,
        seed=args.seed, mode=args.mode, out=args.out,
    )
    table = exact_search.classify_angles(
        args.d, [args.k],
        exact_search.ExactSearchConfig(
            restarts=args.restarts, mode=args.mode, seed=args.seed,
            stop_on_found=True,
        ),
    )
    entry = table[0]
    report = {
        "d": args.d,
        "k": args.k,
        "found_all": entry["found_all"],
        "angles": {
            f"{theta:.10g}": res.found
            for theta, res in entry["angles"].items()
        },
        "config": dict(config.header_items()),
    }
    _emit_report(report, args.out)
    return 0


def cmd_verify(args):
    if (args.name is None) == (args.record is None):
        raise UsageError("give exactly one of --name or --record")
    if args.name:
        report, _ = exact_search.verify_explicit(args.name)
        _emit_report(report, args.out)
        if not report["passed"]:
            print(f"FAIL: {args.name}", file=sys.stderr)
            return 1
        print(f"pass: {args.name}")
        return 0
    if not args.store:
        raise UsageError("--record needs --store")
    store = SolutionStore(args.store)
    records = store.load(verify=False)
    try:
        record = records[args.record]
    except IndexError:
        raise UsageError(
            f"store has {len(records)} records, no index {args.record}"
        ) from None
    reasons = SolutionStore.verify_record(record)
    _emit_report(
        {"record": args.record, "passed": not reasons, "violations": reasons},
        args.out,
    )
    if reasons:
        print(f"FAIL: record {args.record}: " + "; ".join(reasons),
              file=sys.stderr)
        return 1
    print(f"pass: record {args.record}")
    return 0


def cmd_graphs(args):
    report = graphs.nogo_scan(args.d)
    serializable = {
        k: v for k, v in report.items() if k != "consistent_examples"
    }
    serializable["consistent_pair_adjacency"] = [
        {
            "b0": {"inner": [graphs._bits(m) for m in p.b0.inner.supports],
                   "outer": [graphs._bits(m) for m in p.b0.outer.supports]},
            "b1": {"inner": [graphs._bits(m) for m in p.b1.inner.supports],
                   "outer": [graphs._bits(m) for m in p.b1.outer.supports]},
        }
        for p in report["consistent_examples"]
    ]
    serializable["vertex_labels"] = "0-based (0 .. 2d-1)"
    _emit_report(serializable, args.out)
    return 0


def cmd_kak(args):
    theta = parse_angle(args.theta)
    params = qcore.kak_nonlocal_params(qcore.u_theta_gate(theta))
    _emit_report(
        {
            "theta": theta,
            "params": list(params),
            "expected": [0.0, theta / 2, math.pi / 4],
        },
        args.out,
    )
    return 0


def cmd_multibase(args):
    config = approx_search.ApproxConfig(
        restarts=args.restarts, seed=args.seed, mode=args.mode,
        kind=args.kind,
    )
    result = approx_search.minimize_multibase(args.d, args.n, config)
    report = {
        "d": args.d,
        "n": args.n,
        "p_err": result.p_err,
        "restarts": args.restarts,
        "seed": args.seed,
    }
    if args.d == 1:
        closed = errmodel.multibase_d1_p_err(args.n)
        report["closed_form"] = closed
        report["deviation"] = abs(result.p_err - closed)
    _emit_report(report, args.out)
    return 0


def cmd_plot(args):
    from . import plots  # deferred: pulls in matplotlib

    if not args.csv:
        raise UsageError("plot needs at least one CSV input")
    bundle = plots.CurveBundle(
        curves=tuple((label_for(path), path) for path in args.csv),
        overlays=not args.no_overlays,
        logscale=args.logscale,
        multibase=args.multibase,
    )
    deviation = plots.render(bundle, args.out or "p_err.png")
    print(f"wrote {args.out or 'p_err.png'}")
    if deviation is not None:
        print(f"max deviation from analytic overlay: {deviation:.3e}")
    return 0


def label_for(path):
    name = os.path.basename(path)
    match = re.search(r"d(\d+)", name)
    return f"d={match.group(1)}" if match else name


# -- parser -------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="qpvlab",
        description="Search, verify, and characterize entanglement-limited "
                    "attacks on rotation-based position verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, restarts):
        p.add_argument("--restarts", type=int, default=restarts)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mode", choices=("real", "complex"), default="real")
        p.add_argument("--threads", type=int, default=1,
                       help="worker hint; never affects output content")
        p.add_argument("--out", default=None)

    p = sub.add_parser("sweep", help="minimize p_err over a theta grid")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--grid", type=int, default=129)
    p.add_argument("--kind", choices=approx_search.RETRACTION_KINDS,
                   default="cayley")
    p.add_argument("--no-warm-start", action="store_true")
    common(p, restarts=1000)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("exact", help="least-squares search for exact attacks")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--store", default=None)
    p.add_argument("--exhaustive", action="store_true",
                   help="use the whole restart budget even after a find")
    common(p, restarts=1000)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("classify",
                       help="test all multiples of pi/k for exact attacks")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    common(p, restarts=1000)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("verify",
                       help="re-check an explicit attack or a store record")
    p.add_argument("--name", choices=sorted(exact_search.EXPLICIT_SOLUTIONS))
    p.add_argument("--record", type=int, default=None)
    p.add_argument("--store", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("graphs", help="run the no-go enumeration")
    p.add_argument("--d", type=int, required=True, choices=(2, 3))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_graphs)

    p = sub.add_parser("kak", help="nonlocal invariants of the basis gate")
    p.add_argument("--theta", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_kak)

    p = sub.add_parser("multibase",
                       help="optimize the n-basis protocol attack")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kind", choices=approx_search.RETRACTION_KINDS,
                   default="cayley")
    common(p, restarts=1000)
    p.set_defaults(func=cmd_multibase)

    p = sub.add_parser("plot", help="render p_err figures from sweep CSVs")
    p.add_argument("csv", nargs="*")
    p.add_argument("--out", default=None)
    p.add_argument("--no-overlays", action="store_true")
    p.add_argument("--logscale", action="store_true")
    p.add_argument("--multibase", action="store_true",
                   help="interpret inputs as p_err(n) point files")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StoreVerificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
