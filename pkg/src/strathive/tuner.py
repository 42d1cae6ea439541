"""The outer strategy-invention loop.

Starting from a matrix of (protocol, problem) costs, each iteration picks
a protocol together with the problems it is best at, improves it through
four alternating coarse/fine local-search phases, evaluates the result on
the whole corpus, and records which clause evaluation functions (CEFs)
the winner uses.  Usage counters feed back into the CEF collection that
the coarse search draws from, so successful CEFs spread between runs.

All durable state lives in a directory: the cost matrix, one file per
invented protocol, the CEF usage database (file-locked so concurrent
loops on different corpora can share it), and append-only logs of
attempted pairs and finished iterations.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from filelock import FileLock

from .ils import PENALTY, IlsParams, penalized_cost, tune
from .logic import Problem, parse_problem, render_problem
from .protocol import (
    Protocol,
    embed_protocol,
    fine_space,
    lift_to_fine,
    load_value_sets,
    parse_protocol,
    protocol_digest,
    render_protocol,
)
from .prover import Limits, loops_for_seconds, measure_loop_rate, saturate
from .weights import CEF, WEIGHT_FUNCTIONS, parse_cef, render_cef

log = logging.getLogger(__name__)


def problem_set_digest(names: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(names).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# The evaluation matrix.


@dataclass(frozen=True)
class PerfMatrix:
    """Penalized costs of every known protocol on every corpus problem.

    Rows are append-only: re-evaluating never mutates existing cells, so
    cost histories stay comparable across iterations.
    """

    protocols: tuple[Protocol, ...]
    problems: tuple[str, ...]
    costs: tuple[tuple[Fraction, ...], ...]
    t_eval: Fraction

    def __post_init__(self):
        if len(self.costs) != len(self.protocols):
            raise ValueError("one cost row per protocol required")
        for row in self.costs:
            if len(row) != len(self.problems):
                raise ValueError("cost row width must match problem count")
        digests = [protocol_digest(p) for p in self.protocols]
        if len(set(digests)) != len(digests):
            raise ValueError("duplicate protocol row")

    @classmethod
    def empty(cls, problems: Sequence[str], t_eval: Fraction) -> "PerfMatrix":
        return cls((), tuple(problems), (), t_eval)

    def index_of(self, p: Protocol) -> Optional[int]:
        digest = protocol_digest(p)
        for i, q in enumerate(self.protocols):
            if protocol_digest(q) == digest:
                return i
        return None

    def cost(self, i: int, j: int) -> Fraction:
        return self.costs[i][j]

    def solved_set(self, i: int) -> frozenset[int]:
        return frozenset(j for j, c in enumerate(self.costs[i]) if c < PENALTY)

    def total_solved(self) -> int:
        """Problems solved by at least one protocol (the progress metric)."""
        return len({j for i in range(len(self.protocols))
                    for j in self.solved_set(i)})

    def with_row(self, p: Protocol, row: Sequence[Fraction]) -> "PerfMatrix":
        if self.index_of(p) is not None:
            raise ValueError("protocol already has a matrix row")
        return PerfMatrix(self.protocols + (p,), self.problems,
                          self.costs + (tuple(row),), self.t_eval)

    # -- persistence (digest-keyed; protocol text lives in its own file)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out)
        w.writerow(["t_eval", str(self.t_eval)])
        w.writerow(["protocol"] + list(self.problems))
        for p, row in zip(self.protocols, self.costs):
            w.writerow([protocol_digest(p)] + [str(c) for c in row])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str, protocols_by_digest: dict) -> "PerfMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        if len(rows) < 2 or rows[0][0] != "t_eval" or rows[1][0] != "protocol":
            raise ValueError("malformed matrix file")
        t_eval = Fraction(rows[0][1])
        problems = tuple(rows[1][1:])
        protocols, costs = [], []
        for row in rows[2:]:
            if not row:
                continue
            protocols.append(protocols_by_digest[row[0]])
            costs.append(tuple(Fraction(c) for c in row[1:]))
        return cls(tuple(protocols), problems, tuple(costs), t_eval)


# ---------------------------------------------------------------------------
# Eligibility: which (protocol, problem set) pairs are worth improving.


@dataclass(frozen=True)
class EligibilityParams:
    """Band and versatility gates for picking tuning starting points.

    A problem credits its single best protocol, but only when the best
    cost sits inside [c_min, c_max]: cheaper proofs have nothing left to
    teach and dearer ones make evaluation too slow.  A protocol becomes
    eligible once it is best on at least V problems.
    """

    c_min: int = 500
    c_max: int = 30_000
    V: int = 2
    N: int = 20

    def __post_init__(self):
        if self.c_min >= self.c_max:
            raise ValueError("c_min must be below c_max")
        if self.V < 1 or self.N < 1:
            raise ValueError("V and N must be positive")


def eligible(matrix: PerfMatrix,
             e: EligibilityParams) -> list[tuple[Protocol, tuple[str, ...]]]:
    """Protocols worth tuning, each with the problems it is best at,
    ordered by credited-problem count (ties to the earlier row)."""
    credited: dict[int, list[int]] = {}
    for j in range(len(matrix.problems)):
        best_i, best_cost = None, None
        for i in range(len(matrix.protocols)):
            c = matrix.cost(i, j)
            if c < PENALTY and (best_cost is None or c < best_cost):
                best_i, best_cost = i, c
        if best_i is not None and e.c_min <= best_cost <= e.c_max:
            credited.setdefault(best_i, []).append(j)
    ranked = sorted(
        (i for i, probs in credited.items() if len(probs) >= e.V),
        key=lambda i: (-len(credited[i]), i))
    return [(matrix.protocols[i],
             tuple(matrix.problems[j] for j in credited[i]))
            for i in ranked[: e.N]]


# ---------------------------------------------------------------------------
# The CEF usage database.


@dataclass
class CefDb:
    """Usage counters per canonical CEF text; shared between runs."""

    entries: dict[str, int] = field(default_factory=dict)

    def bump(self, cef_text: str, by: int = 1) -> None:
        if by < 0:
            raise ValueError("counters only increase")
        self.entries[cef_text] = self.entries.get(cef_text, 0) + by

    def ensure(self, cef_text: str) -> None:
        self.entries.setdefault(cef_text, 0)

    def to_json(self) -> str:
        return json.dumps(self.entries, indent=0, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CefDb":
        data = json.loads(text)
        if not all(isinstance(v, int) and v >= 0 for v in data.values()):
            raise ValueError("corrupt CEF database")
        return cls(dict(data))


def seed_collection() -> list[CEF]:
    """One shipped default CEF per weight function, in registry order."""
    from importlib import resources

    text = resources.files("strathive.data").joinpath("seed_cefs.json").read_text()
    seeds = [parse_cef(s) for s in json.loads(text)]
    names = [c.weight.name for c in seeds]
    if names != list(WEIGHT_FUNCTIONS):
        raise ValueError("seed file out of sync with the weight registry")
    return seeds


def select_top_cefs(db: CefDb, k: int) -> list[CEF]:
    """Round-robin over weight functions, taking each function's
    most-used CEF per round, until k CEFs are chosen or the database is
    exhausted.  Guarantees every function present in the database is
    represented, which needs k of at least that many.
    """
    buckets: dict[str, list[tuple[int, str]]] = {}
    for text, count in db.entries.items():
        cef = parse_cef(text)
        buckets.setdefault(cef.weight.name, []).append((count, text))
    if k < len(buckets):
        raise ValueError(
            f"k={k} below the {len(buckets)} weight functions present")
    for rows in buckets.values():
        rows.sort(key=lambda it: (-it[0], it[1]))
    order = [n for n in WEIGHT_FUNCTIONS if n in buckets]
    chosen: list[str] = []
    at = {n: 0 for n in order}
    while len(chosen) < k:
        took = False
        for n in order:
            if len(chosen) >= k:
                break
            if at[n] < len(buckets[n]):
                chosen.append(buckets[n][at[n]][1])
                at[n] += 1
                took = True
        if not took:
            break
    return [parse_cef(t) for t in chosen]


def update_cefdb_file(path: Path, used_texts: Sequence[str],
                      seeds: Sequence[str] = ()) -> CefDb:
    """Locked read-modify-write of the shared database file."""
    path = Path(path)
    with FileLock(str(path) + ".lock"):
        db = CefDb.from_json(path.read_text()) if path.exists() else CefDb()
        for text in seeds:
            db.ensure(text)
        for text in used_texts:
            db.bump(text)
        path.write_text(db.to_json())
    return db


# ---------------------------------------------------------------------------
# Prover-backed evaluation.


def _run_cell(problem_text: str, protocol_text: str, max_loops: int,
              max_seconds: float) -> str:
    """Worker entry: parse, saturate, return the penalized cost as text.
    Takes and returns plain strings so process pools need no custom
    pickling."""
    problem = parse_problem(problem_text)
    proto = parse_protocol(protocol_text)
    limits = Limits(max_seconds=max_seconds, max_loops=max_loops,
                    max_clauses=max(2000, 40 * max_loops))
    return str(penalized_cost(saturate(problem, proto, limits)))


class ProtocolRunner:
    """Evaluates protocols on corpus problems with a shared cell cache.

    The cache key includes the loop limit, so low-cutoff search phases and
    high-cutoff matrix evaluation never collide.
    """

    def __init__(self, corpus: dict[str, Problem], workers: int = 1):
        self.corpus = dict(corpus)
        self._texts = {name: render_problem(p) for name, p in corpus.items()}
        self.workers = max(1, workers)
        self.cache: dict[tuple[str, str, int], Fraction] = {}
        self._pool: Optional[ProcessPoolExecutor] = None

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _ensure_pool(self) -> ProcessPoolExecutor:
        if self._pool is None:
            self._pool = ProcessPoolExecutor(max_workers=self.workers)
        return self._pool

    def costs(self, proto: Protocol, names: Sequence[str], max_loops: int,
              max_seconds: float) -> list[Fraction]:
        digest = protocol_digest(proto)
        missing = [n for n in names
                   if (digest, n, max_loops) not in self.cache]
        if missing:
            text = render_protocol(proto)
            jobs = [(self._texts[n], text, max_loops, max_seconds)
                    for n in missing]
            if self.workers > 1 and len(jobs) > 1:
                results = list(self._ensure_pool().map(_run_cell, *zip(*jobs)))
            else:
                results = [_run_cell(*j) for j in jobs]
            for n, r in zip(missing, results):
                self.cache[(digest, n, max_loops)] = Fraction(r)
        return [self.cache[(digest, n, max_loops)] for n in names]


class SpaceOracle:
    """Oracle adapter: decode a configuration, run the prover over the
    iteration's problem subset."""

    def __init__(self, runner: ProtocolRunner, space, max_loops: int,
                 max_seconds: float):
        self.runner = runner
        self.space = space
        self.max_loops = max_loops
        self.max_seconds = max_seconds

    def evaluate(self, config, problems: Sequence[str]) -> list[Fraction]:
        proto = self.space.decode(config)
        return self.runner.costs(proto, problems, self.max_loops,
                                 self.max_seconds)


# ---------------------------------------------------------------------------
# Tuner configuration and the loop itself.


@dataclass
class TunerConfig:
    """Loop parameters; the evaluation limit defaults to five times the
    search cutoff."""

    T_improve: Fraction = Fraction(100)
    t_cutoff: Fraction = Fraction(1)
    t_eval: Optional[Fraction] = None
    c_cef: int = 6
    eligibility: EligibilityParams = field(default_factory=EligibilityParams)
    collection_size: int = 50
    # exact per-phase evaluation cap for reproducible tests; None = wall only
    max_evals_per_phase: Optional[int] = None

    def __post_init__(self):
        if self.t_eval is None:
            self.t_eval = 5 * self.t_cutoff
        if self.T_improve <= 0 or self.t_cutoff <= 0:
            raise ValueError("time budgets must be positive")
        if self.t_cutoff > self.t_eval:
            raise ValueError("t_cutoff must not exceed t_eval")
        if self.c_cef < 1:
            raise ValueError("c_cef must be >= 1")
        if self.collection_size < len(WEIGHT_FUNCTIONS):
            raise ValueError("collection_size below weight function count")


PHASES = ("global", "fine", "global", "fine")


class Tuner:
    """One tuning loop bound to a corpus and a state directory."""

    def __init__(self, corpus: dict[str, Problem], config: TunerConfig,
                 state_dir, rng_seed: int = 0, workers: int = 1,
                 loop_rate: Optional[int] = None,
                 value_domains: Optional[dict] = None):
        self.corpus = dict(corpus)
        self.config = config
        self.state_dir = Path(state_dir)
        self.rng_seed = rng_seed
        self.domains = value_domains or load_value_sets()
        self.rate = loop_rate if loop_rate is not None else measure_loop_rate()
        self.cutoff_loops = loops_for_seconds(config.t_cutoff, self.rate)
        self.eval_loops = loops_for_seconds(config.t_eval, self.rate)
        # wall caps are safety valves; the loop limits are the real cutoffs
        self.cutoff_wall = max(2.0, 4 * float(config.t_cutoff))
        self.eval_wall = max(10.0, 4 * float(config.t_eval))
        self.runner = ProtocolRunner(corpus, workers)
        self.seeds = [render_cef(c) for c in seed_collection()]

        self.state_dir.mkdir(parents=True, exist_ok=True)
        (self.state_dir / "protocols").mkdir(exist_ok=True)
        self.matrix = self._load_matrix()
        self.db = update_cefdb_file(self._cefdb_path, [], seeds=self.seeds)
        self.collection = select_top_cefs(self.db, config.collection_size)
        self.attempted = self._load_attempted()
        self.iteration_count = self._count_iterations()

    # -- state files

    @property
    def _matrix_path(self) -> Path:
        return self.state_dir / "matrix.csv"

    @property
    def _cefdb_path(self) -> Path:
        return self.state_dir / "cefdb.json"

    @property
    def _attempted_path(self) -> Path:
        return self.state_dir / "attempted.log"

    @property
    def _iterations_path(self) -> Path:
        return self.state_dir / "iterations.log"

    def _load_matrix(self) -> PerfMatrix:
        if not self._matrix_path.exists():
            return PerfMatrix.empty(sorted(self.corpus), self.config.t_eval)
        by_digest = {}
        for f in (self.state_dir / "protocols").iterdir():
            proto = parse_protocol(f.read_text().strip())
            by_digest[f.stem] = proto
        m = PerfMatrix.from_csv(self._matrix_path.read_text(), by_digest)
        if m.problems != tuple(sorted(self.corpus)):
            raise ValueError("state directory was built for a different corpus")
        return m

    def _load_attempted(self) -> set[tuple[str, str]]:
        out = set()
        if self._attempted_path.exists():
            for line in self._attempted_path.read_text().splitlines():
                parts = line.split()
                if len(parts) == 2:
                    out.add((parts[0], parts[1]))
        return out

    def _count_iterations(self) -> int:
        if not self._iterations_path.exists():
            return 0
        return sum(1 for l in self._iterations_path.read_text().splitlines() if l)

    def _save_matrix(self) -> None:
        for p in self.matrix.protocols:
            f = self.state_dir / "protocols" / f"{protocol_digest(p)}.txt"
            if not f.exists():
                f.write_text(render_protocol(p) + "\n")
        tmp = self._matrix_path.with_suffix(".tmp")
        tmp.write_text(self.matrix.to_csv())
        os.replace(tmp, self._matrix_path)

    # -- evaluation

    def evaluate_protocol(self, matrix: PerfMatrix, p: Protocol) -> PerfMatrix:
        """Append the full-corpus cost row of ``p`` at evaluation limits."""
        row = self.runner.costs(p, matrix.problems, self.eval_loops,
                                self.eval_wall)
        return matrix.with_row(p, row)

    def bootstrap(self, protocols: Sequence[Protocol]) -> None:
        """Seed the matrix so the first iteration has something to improve."""
        for p in protocols:
            if self.matrix.index_of(p) is None:
                self.matrix = self.evaluate_protocol(self.matrix, p)
        self._save_matrix()

    # -- the iteration

    def _phase_params(self, phase_index: int) -> IlsParams:
        seed = (self.rng_seed * 100_003 + self.iteration_count * 4
                + phase_index)
        return IlsParams(budget_seconds=self.config.T_improve, rng_seed=seed,
                         max_evaluations=self.config.max_evals_per_phase)

    def improve(self, theta0: Protocol, problems: Sequence[str]) -> Protocol:
        """The four-phase chain: shape search, value search, twice over."""
        current = theta0
        collection = list(self.collection)
        for k, phase in enumerate(PHASES):
            params = self._phase_params(k)
            if phase == "global":
                cfg0, collection, gspace = embed_protocol(
                    current, collection, self.config.c_cef, self.domains)
                oracle = SpaceOracle(self.runner, gspace, self.cutoff_loops,
                                     self.cutoff_wall)
                res = tune(gspace, cfg0, problems, oracle, params)
                current = gspace.decode(res.best)
            else:
                fspace = fine_space(current, self.domains)
                oracle = SpaceOracle(self.runner, fspace, self.cutoff_loops,
                                     self.cutoff_wall)
                res = tune(fspace, lift_to_fine(current, fspace), problems,
                           oracle, params)
                current = fspace.decode(res.best)
        return current

    def pick_pair(self) -> Optional[tuple[Protocol, tuple[str, ...]]]:
        for proto, problems in eligible(self.matrix, self.config.eligibility):
            key = (protocol_digest(proto), problem_set_digest(problems))
            if key not in self.attempted:
                return proto, problems
        return None

    def iteration(self) -> bool:
        """Run one improvement iteration; False when nothing is left to try."""
        started = time.monotonic()
        pair = self.pick_pair()
        if pair is None:
            return False
        theta0, problems = pair
        log.info("iteration %d: improving %s on %d problems",
                 self.iteration_count + 1, protocol_digest(theta0),
                 len(problems))
        final = self.improve(theta0, problems)

        new_row = self.matrix.index_of(final) is None
        if new_row:
            self.matrix = self.evaluate_protocol(self.matrix, final)
        used = sorted({render_cef(c) for _, c in final.cefs})
        self._save_matrix()
        self.db = update_cefdb_file(self._cefdb_path, used, seeds=self.seeds)
        key = (protocol_digest(theta0), problem_set_digest(problems))
        self.attempted.add(key)
        with self._attempted_path.open("a") as f:
            f.write(f"{key[0]} {key[1]}\n")
        self.collection = select_top_cefs(self.db, self.config.collection_size)
        self.iteration_count += 1
        best_row = max(range(len(self.matrix.protocols)),
                       key=lambda i: (len(self.matrix.solved_set(i)), -i))
        with self._iterations_path.open("a") as f:
            f.write(json.dumps({
                "iteration": self.iteration_count,
                "protocols": len(self.matrix.protocols),
                "run_seconds": round(time.monotonic() - started, 2),
                "best": protocol_digest(self.matrix.protocols[best_row]),
                "solved_total": self.matrix.total_solved(),
                "theta0": key[0],
                "problems": len(problems),
                "final": protocol_digest(final),
                "new_row": new_row,
            }) + "\n")
        return True

    def run(self, max_iterations: int) -> int:
        """Iterate until exhaustion or the cap; returns iterations done."""
        done = 0
        while done < max_iterations and self.iteration():
            done += 1
        return done
