"""Command-line surface: prove, tune, eval, schedule, cef-db.

Every run that touches a state directory records a manifest (corpus
path, tuning parameters, seed, worker count, and the measured
loops-per-second calibration constant).  Resumed runs reuse the stored
manifest, so loop limits and random streams replay exactly.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .logic import ParseError, Problem, parse_problem
from .protocol import (
    Protocol,
    ProtocolError,
    parse_protocol,
    protocol_digest,
    render_protocol,
)
from .prover import Limits, measure_loop_rate, saturate
from .scheduler import (
    ScheduleError,
    ScheduleMethod,
    build_schedule,
    render_schedule,
    run_schedule,
)
from .tuner import CefDb, EligibilityParams, Tuner, TunerConfig, select_top_cefs
from .weights import CefError, parse_rational, render_cef, render_rational

# general-purpose default: heaviest-clauses-last with a FIFO tiebreaker
DEFAULT_PROTOCOL = ("-tNONE -WSelectLargestNeg "
                    "-H'(5*Clauseweight(PreferAll,2,1,1),"
                    "1*FIFOWeight(PreferAll))'")

USAGE_ERRORS = (CefError, ParseError, ProtocolError, ScheduleError,
                ValueError, OSError, KeyError)


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# Manifest


@dataclass
class RunManifest:
    corpus: str
    config: TunerConfig
    seed: int
    workers: int
    state_dir: str
    loop_rate: int

    def to_json(self) -> str:
        cfg = self.config
        return json.dumps({
            "corpus": self.corpus,
            "seed": self.seed,
            "workers": self.workers,
            "state_dir": self.state_dir,
            "loop_rate": self.loop_rate,
            "config": {
                "T_improve": render_rational(cfg.T_improve),
                "t_cutoff": render_rational(cfg.t_cutoff),
                "t_eval": render_rational(cfg.t_eval),
                "c_cef": cfg.c_cef,
                "collection_size": cfg.collection_size,
                "max_evals_per_phase": cfg.max_evals_per_phase,
                "eligibility": {
                    "c_min": cfg.eligibility.c_min,
                    "c_max": cfg.eligibility.c_max,
                    "V": cfg.eligibility.V,
                    "N": cfg.eligibility.N,
                },
            },
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        c = d["config"]
        config = TunerConfig(
            T_improve=parse_rational(c["T_improve"]),
            t_cutoff=parse_rational(c["t_cutoff"]),
            t_eval=parse_rational(c["t_eval"]),
            c_cef=c["c_cef"],
            collection_size=c["collection_size"],
            max_evals_per_phase=c["max_evals_per_phase"],
            eligibility=EligibilityParams(**c["eligibility"]),
        )
        return cls(corpus=d["corpus"], config=config, seed=d["seed"],
                   workers=d["workers"], state_dir=d["state_dir"],
                   loop_rate=d["loop_rate"])


# ---------------------------------------------------------------------------
# Shared plumbing


def read_protocol(text_or_path: str) -> Protocol:
    """An argument is a protocol file if it names one, else inline text."""
    p = Path(text_or_path)
    try:
        if p.is_file():
            return parse_protocol(p.read_text().strip())
    except OSError:
        pass
    return parse_protocol(text_or_path)


def load_corpus(path: str) -> dict[str, Problem]:
    d = Path(path)
    if not d.is_dir():
        raise CliError(f"corpus directory not found: {path}")
    files = sorted(d.glob("*.p"))
    if not files:
        raise CliError(f"no .p problem files in {path}")
    return {f.name: parse_problem(f.read_text(), name=f.name) for f in files}


def state_dir_of(args) -> Path:
    if args.state_dir:
        return Path(args.state_dir)
    raise CliError("no state directory: pass --state-dir or set STRATHIVE_STATE")


def obtain_manifest(args, state: Path) -> RunManifest:
    """Reuse a stored manifest when resuming; build and record one
    otherwise.  The calibration constant is measured exactly once per
    state directory."""
    mpath = state / "manifest.json"
    if mpath.exists():
        m = RunManifest.from_json(mpath.read_text())
        if args.corpus and str(args.corpus) != m.corpus:
            raise CliError("state directory belongs to corpus "
                           f"{m.corpus!r}, not {args.corpus!r}")
        return m
    if not args.corpus:
        raise CliError("--corpus is required for a fresh state directory")
    config = TunerConfig(
        T_improve=parse_rational(args.t_improve),
        t_cutoff=parse_rational(args.t_cutoff),
        t_eval=parse_rational(args.t_eval) if args.t_eval else None,
        c_cef=args.c_cef,
        collection_size=args.collection_size,
        max_evals_per_phase=args.max_evals_per_phase,
        eligibility=EligibilityParams(c_min=args.c_min, c_max=args.c_max,
                                      V=args.versatility, N=args.max_eligible),
    )
    rate = args.loop_rate if args.loop_rate else measure_loop_rate()
    m = RunManifest(corpus=str(args.corpus), config=config, seed=args.seed,
                    workers=args.workers, state_dir=str(state), loop_rate=rate)
    state.mkdir(parents=True, exist_ok=True)
    mpath.write_text(m.to_json() + "\n")
    return m


def make_tuner(manifest: RunManifest) -> Tuner:
    corpus = load_corpus(manifest.corpus)
    return Tuner(corpus, manifest.config, manifest.state_dir,
                 rng_seed=manifest.seed, workers=manifest.workers,
                 loop_rate=manifest.loop_rate)


def append_progress(state: Path, iteration: int, solved: int) -> None:
    path = state / "progress.csv"
    if not path.exists():
        path.write_text("iteration,solved_total\n")
    with path.open("a") as f:
        f.write(f"{iteration},{solved}\n")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_prove(args) -> int:
    problem = parse_problem(Path(args.problem).read_text(), name=args.problem)
    proto = read_protocol(args.protocol)
    limits = Limits(max_seconds=args.max_seconds, max_loops=args.max_loops,
                    max_clauses=args.max_clauses,
                    max_memory_mb=args.memory_mb)
    r = saturate(problem, proto, limits)
    out = {
        "problem": args.problem,
        "protocol": render_protocol(proto),
        "status": r.status.value,
        "gc_loops": r.gc_loops,
        "derived_count": r.derived_count,
        "wall_time": round(r.wall_time, 6),
        "proof": r.proof_records() if r.proved else None,
    }
    print(json.dumps(out, indent=2))
    return 0 if r.proved else 1


def cmd_tune(args) -> int:
    state = state_dir_of(args)
    manifest = obtain_manifest(args, state)
    t = make_tuner(manifest)
    if not t.matrix.protocols:
        seeds = [read_protocol(s) for s in (args.seed_protocol
                                            or [DEFAULT_PROTOCOL])]
        t.bootstrap(seeds)
        append_progress(state, 0, t.matrix.total_solved())
    started = time.monotonic()
    budget = float(parse_rational(args.budget))
    done = 0
    while done < args.iterations:
        if time.monotonic() - started >= budget:
            break
        if not t.iteration():
            break
        done += 1
        append_progress(state, t.iteration_count, t.matrix.total_solved())
    print(json.dumps({
        "iterations_run": done,
        "iterations_total": t.iteration_count,
        "protocols": len(t.matrix.protocols),
        "solved_total": t.matrix.total_solved(),
        "problems": len(t.matrix.problems),
        "seed": manifest.seed,
    }, indent=2))
    return 0


def cmd_eval(args) -> int:
    state = state_dir_of(args)
    manifest = obtain_manifest(args, state)
    t = make_tuner(manifest)
    print("protocol,solved,problems")
    for spec in args.protocols:
        p = read_protocol(spec)
        i = t.matrix.index_of(p)
        if i is None:
            t.matrix = t.evaluate_protocol(t.matrix, p)
            i = t.matrix.index_of(p)
        print(f"{protocol_digest(p)},{len(t.matrix.solved_set(i))},"
              f"{len(t.matrix.problems)}")
    t._save_matrix()
    return 0


def method_spec(text: str) -> ScheduleMethod:
    """Accepts greedy(1) and the label form greedy_1."""
    s = text.strip()
    if "(" not in s and "_" in s:
        kind, val = s.rsplit("_", 1)
        s = f"{kind}({val})"
    return ScheduleMethod.parse(s)


def method_label(m: ScheduleMethod) -> str:
    return m.render().replace("(", "_").rstrip(")").replace("/", "over")


def cmd_schedule(args) -> int:
    state = state_dir_of(args)
    manifest = obtain_manifest(args, state)
    t = make_tuner(manifest)
    if not t.matrix.protocols:
        raise CliError("matrix is empty: run tune or eval first")
    total = parse_rational(args.total_seconds)
    out_dir = state / "schedules"
    out_dir.mkdir(exist_ok=True)
    rows = []
    for spec in args.methods:
        m = method_spec(spec)
        s = build_schedule(m, t.matrix, manifest.loop_rate)
        (out_dir / f"{method_label(m)}.sched").write_text(render_schedule(s))
        solved = sum(run_schedule(s, t.corpus[n], total,
                                  manifest.loop_rate).proved
                     for n in t.matrix.problems)
        rows.append(f"{method_label(m)},{len(s.protocols)},{solved}")
    report = "scheduler,protos,solved\n" + "\n".join(rows) + "\n"
    print(report, end="")
    if args.report:
        Path(args.report).write_text(report)
    return 0


def cmd_cefdb(args) -> int:
    state = state_dir_of(args)
    path = state / "cefdb.json"
    if not path.exists():
        raise CliError(f"no CEF database at {path}")
    db = CefDb.from_json(path.read_text())
    if args.select:
        for cef in select_top_cefs(db, args.select):
            print(render_cef(cef))
    else:
        print("cef,count")
        for text, count in sorted(db.entries.items(),
                                  key=lambda it: (-it[1], it[0])):
            print(f"{text},{count}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def add_state_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--state-dir", default=os.environ.get("STRATHIVE_STATE"),
                   help="state directory (default: $STRATHIVE_STATE)")
    p.add_argument("--corpus", help="directory of .p problem files")
    p.add_argument("--t-improve", default="100",
                   help="seconds per local-search phase")
    p.add_argument("--t-cutoff", default="1",
                   help="prover seconds inside the search")
    p.add_argument("--t-eval", default=None,
                   help="evaluation seconds (default 5*t_cutoff)")
    p.add_argument("--c-cef", type=int, default=6,
                   help="max CEF slots per protocol")
    p.add_argument("--collection-size", type=int, default=50)
    p.add_argument("--c-min", type=int, default=500)
    p.add_argument("--c-max", type=int, default=30_000)
    p.add_argument("--versatility", type=int, default=2,
                   help="problems a protocol must lead on to be tuned")
    p.add_argument("--max-eligible", type=int, default=20)
    p.add_argument("--max-evals-per-phase", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--loop-rate", type=int, default=None,
                   help="pin the calibration constant (loops/second)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="strathive",
        description="Invent, tune, and schedule clause-selection strategies")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prove", help="run one protocol on one problem")
    p.add_argument("problem", help="problem file")
    p.add_argument("--protocol", default=DEFAULT_PROTOCOL,
                   help="protocol text or a file containing one")
    p.add_argument("--max-seconds", type=float, default=60.0)
    p.add_argument("--max-loops", type=int, default=100_000)
    p.add_argument("--max-clauses", type=int, default=200_000)
    p.add_argument("--memory-mb", type=int, default=1024)
    p.set_defaults(fn=cmd_prove)

    p = sub.add_parser("tune", help="run improvement iterations")
    add_state_args(p)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--budget", default="3600",
                   help="wall-clock seconds for this invocation")
    p.add_argument("--seed-protocol", action="append",
                   help="bootstrap protocol (repeatable)")
    p.set_defaults(fn=cmd_tune)

    p = sub.add_parser("eval", help="evaluate protocols into the matrix")
    add_state_args(p)
    p.add_argument("protocols", nargs="+",
                   help="protocol text or files containing one")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("schedule",
                       help="build schedules and report solved counts")
    add_state_args(p)
    p.add_argument("methods", nargs="+",
                   help="method specs like 'greedy(1)' or 'sotac_15'")
    p.add_argument("--total-seconds", default="5",
                   help="per-problem budget when evaluating a schedule")
    p.add_argument("--report", help="also write the CSV report here")
    p.set_defaults(fn=cmd_schedule)

    p = sub.add_parser("cef-db", help="inspect the CEF usage database")
    p.add_argument("--state-dir", default=os.environ.get("STRATHIVE_STATE"))
    p.add_argument("--select", type=int, default=None,
                   help="print the collection the tuner would draw")
    p.set_defaults(fn=cmd_cefdb)

    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, *USAGE_ERRORS) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
