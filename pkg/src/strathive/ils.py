"""Iterated local search over a configuration space.

The search alternates first-improvement one-exchange descent with
perturbation of the best configuration found so far, occasionally
restarting from a fresh configuration.  Every configuration is evaluated
on the full problem set and costs are cached by config digest, so the
number of oracle calls equals the number of distinct configurations
visited.  With a fixed seed and a deterministic oracle the whole search
is reproducible.
"""

from __future__ import annotations

import json
import logging
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .protocol import Config, ConfigSpace, ParamDef
from .prover import ProverResult

log = logging.getLogger(__name__)

PENALTY = Fraction(10 ** 6)


def penalized_cost(r: ProverResult) -> Fraction:
    """Loop count of a successful proof, or the unsolved penalty."""
    if r.proved:
        return Fraction(r.gc_loops)
    return PENALTY


class FunctionOracle:
    """Adapter turning a plain function (config, problems) -> costs into
    the oracle interface."""

    def __init__(self, fn: Callable[[Config, Sequence], list[Fraction]]):
        self._fn = fn

    def evaluate(self, config: Config, problems: Sequence) -> list[Fraction]:
        return self._fn(config, problems)


@dataclass
class IlsParams:
    budget_seconds: Fraction = Fraction(10)
    restart_prob: float = 0.01
    perturb_strength: int = 3
    rng_seed: int = 0
    # an exact evaluation cap; wall-clock budgets cannot give reproducible
    # stopping points, so tests and bounded searches set this instead
    max_evaluations: Optional[int] = None

    def __post_init__(self):
        if self.budget_seconds <= 0:
            raise ValueError("budget_seconds must be positive")
        if not 0 <= self.restart_prob <= 1:
            raise ValueError("restart_prob must be a probability")
        if self.perturb_strength < 1:
            raise ValueError("perturb_strength must be positive")


@dataclass
class EvalRecord:
    digest: str
    cost: Fraction
    solved: int
    wall_time: float


@dataclass
class IlsResult:
    best: Config
    best_cost: Fraction
    evaluations: int
    trajectory: list[EvalRecord] = field(default_factory=list)


class _BudgetExhausted(Exception):
    pass


class _Search:
    def __init__(self, space: ConfigSpace, problems: Sequence, oracle,
                 params: IlsParams, trajectory_log=None):
        self.space = space
        self.problems = list(problems)
        self.oracle = oracle
        self.params = params
        self.rng = random.Random(params.rng_seed)
        self.cache: dict[str, Fraction] = {}
        self.trajectory: list[EvalRecord] = []
        self.log_file = trajectory_log
        self.best: Optional[Config] = None
        self.best_cost = PENALTY + 1
        self.deadline = time.monotonic() + float(params.budget_seconds)
        self.evaluations = 0

    def cost(self, config: Config) -> Fraction:
        digest = config.digest()
        hit = self.cache.get(digest)
        if hit is not None:
            return hit
        if self.evaluations > 0:     # theta0 is always evaluated
            if time.monotonic() >= self.deadline:
                raise _BudgetExhausted
            if (self.params.max_evaluations is not None
                    and self.evaluations >= self.params.max_evaluations):
                raise _BudgetExhausted
        started = time.monotonic()
        try:
            per_problem = self.oracle.evaluate(config, self.problems)
        except Exception:
            log.warning("oracle failed on config %s; penalizing", digest,
                        exc_info=True)
            per_problem = [PENALTY] * len(self.problems)
        if len(per_problem) != len(self.problems):
            raise ValueError("oracle returned %d costs for %d problems"
                             % (len(per_problem), len(self.problems)))
        mean = Fraction(sum(Fraction(c) for c in per_problem), len(self.problems))
        self.evaluations += 1
        self.cache[digest] = mean
        solved = sum(1 for c in per_problem if c < PENALTY)
        record = EvalRecord(digest, mean, solved, time.monotonic() - started)
        self.trajectory.append(record)
        if self.log_file is not None:
            self.log_file.write(json.dumps({
                "config": digest, "mean_cost": str(mean), "solved": solved,
                "wall_time": round(record.wall_time, 4)}) + "\n")
        if mean < self.best_cost:
            self.best, self.best_cost = config, mean
        return mean

    def neighbors(self, config: Config) -> list[tuple[ParamDef, object]]:
        """One-exchange moves: (parameter, new value), declaration order.

        Ladder parameters (ordered numeric scales) only step to adjacent
        values; everything else may jump anywhere in its domain.
        """
        out: list[tuple[ParamDef, object]] = []
        for p in self.space.params:
            current = config[p.name]
            if p.ladder:
                at = p.domain.index(current)
                for j in (at - 1, at + 1):
                    if 0 <= j < len(p.domain):
                        out.append((p, p.domain[j]))
            else:
                out.extend((p, v) for v in p.domain if v != current)
        return out

    def descend(self, config: Config) -> tuple[Config, Fraction]:
        """First-improvement local search to a local optimum."""
        current, current_cost = config, self.cost(config)
        improved = True
        while improved:
            improved = False
            moves = self.neighbors(current)
            self.rng.shuffle(moves)
            for p, v in moves:
                neighbor = current.with_value(p.name, v)
                if self.cost(neighbor) < current_cost:
                    current, current_cost = neighbor, self.cache[neighbor.digest()]
                    improved = True
                    break
        return current, current_cost

    def perturb(self, config: Config) -> Config:
        out = config
        for _ in range(self.params.perturb_strength):
            p = self.rng.choice(self.space.params)
            options = [v for v in p.domain if v != out[p.name]]
            if options:
                out = out.with_value(p.name, self.rng.choice(options))
        return out

    def fresh_start(self) -> Optional[Config]:
        """A restart point, preferring configurations not yet evaluated so
        small spaces end up fully enumerated."""
        for _ in range(10):
            candidate = self.space.random_config(self.rng)
            if candidate.digest() not in self.cache:
                return candidate
        for candidate in self.space.iter_configs():
            if candidate.digest() not in self.cache:
                return candidate
        return None

    def run(self, theta0: Config) -> IlsResult:
        try:
            self.descend(theta0)
            while len(self.cache) < self.space.size():
                # cached rounds consume no oracle calls, so check the
                # clock here as well
                if time.monotonic() >= self.deadline:
                    break
                if self.rng.random() < self.params.restart_prob:
                    start = self.fresh_start()
                    if start is None:
                        break
                else:
                    start = self.perturb(self.best)
                self.descend(start)
        except _BudgetExhausted:
            pass
        return IlsResult(best=self.best, best_cost=self.best_cost,
                         evaluations=self.evaluations,
                         trajectory=self.trajectory)


def tune(space: ConfigSpace, theta0: Config, problems: Sequence, oracle,
         params: IlsParams, trajectory_log=None) -> IlsResult:
    """Search the space for a low mean cost starting from theta0.

    theta0 is evaluated first and unconditionally, so the result is never
    worse than the starting point.  ``oracle.evaluate(config, problems)``
    returns one cost per problem (see :func:`penalized_cost`); an oracle
    exception penalizes that configuration and the search continues.
    ``trajectory_log`` takes a line-oriented JSON record per evaluation.
    """
    if not problems:
        raise ValueError("problem set must be nonempty")
    if not space.contains(theta0):
        raise ValueError("theta0 is not a member of the search space")
    search = _Search(space, problems, oracle, params, trajectory_log)
    return search.run(theta0)
