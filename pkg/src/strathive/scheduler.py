"""Protocol schedules: try several protocols in sequence on one problem.

A schedule is built from a performance matrix by one of three methods:
greedy set covering (each slot adds the most newly solved problems),
SOTAC (protocols ranked by how uniquely they solve things, averaged),
or E-SOTAC (the same uniqueness credit, summed instead of averaged).
Execution splits the total time budget equally across slots and stops
at the first proof.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .ils import PENALTY
from .logic import Problem
from .protocol import Protocol, parse_protocol, protocol_digest, render_protocol
from .prover import Limits, ProofStatus, ProverResult, loops_for_seconds, saturate
from .weights import parse_rational, render_rational


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleMethod:
    """greedy(t seconds) | sotac(n protocols) | esotac(n protocols)."""

    kind: str
    value: Union[Fraction, int]

    def __post_init__(self):
        if self.kind == "greedy":
            if not isinstance(self.value, Fraction) or self.value <= 0:
                raise ScheduleError("greedy needs a positive time in seconds")
        elif self.kind in ("sotac", "esotac"):
            if not isinstance(self.value, int) or self.value < 1:
                raise ScheduleError(f"{self.kind} needs a count >= 1")
        else:
            raise ScheduleError(f"unknown schedule method {self.kind!r}")

    def render(self) -> str:
        v = (render_rational(self.value) if isinstance(self.value, Fraction)
             else str(self.value))
        return f"{self.kind}({v})"

    @classmethod
    def parse(cls, text: str) -> "ScheduleMethod":
        s = text.strip()
        lp = s.find("(")
        if lp < 0 or not s.endswith(")"):
            raise ScheduleError(f"malformed method {text!r}")
        kind, arg = s[:lp], s[lp + 1 : -1]
        if kind == "greedy":
            return cls(kind, parse_rational(arg))
        return cls(kind, int(arg))


@dataclass(frozen=True)
class Scheduler:
    """An ordered, duplicate-free protocol sequence with a slot time.

    ``slot_seconds`` records the per-protocol time the schedule was
    designed for: the covering limit for greedy, the matrix evaluation
    limit for the score-based methods.
    """

    protocols: tuple[Protocol, ...]
    method: ScheduleMethod
    slot_seconds: Fraction

    def __post_init__(self):
        if not self.protocols:
            raise ScheduleError("a schedule needs at least one protocol")
        digests = [protocol_digest(p) for p in self.protocols]
        if len(set(digests)) != len(digests):
            raise ScheduleError("duplicate protocol in schedule")
        if self.slot_seconds <= 0:
            raise ScheduleError("slot_seconds must be positive")


# ---------------------------------------------------------------------------
# Construction.


def _solved(matrix, i: int, j: int, threshold: Optional[int]) -> bool:
    c = matrix.cost(i, j)
    if c >= PENALTY:
        return False
    return threshold is None or c <= threshold


def greedy_cover(matrix, threshold: Optional[int] = None) -> list[Protocol]:
    """Covering sequence: start from the protocol solving the most
    problems, then repeatedly add the one contributing the most problems
    not yet covered.  Ties go to the earlier matrix row; stops when no
    protocol adds anything.  ``threshold`` restricts "solved" to proofs
    within that many loops.
    """
    n_p, n_j = len(matrix.protocols), len(matrix.problems)
    solved = [frozenset(j for j in range(n_j) if _solved(matrix, i, j, threshold))
              for i in range(n_p)]
    covered: set[int] = set()
    picked: list[int] = []
    remaining = set(range(n_p))
    while remaining:
        best_i, best_gain = None, 0
        for i in sorted(remaining):
            gain = len(solved[i] - covered)
            if gain > best_gain:
                best_i, best_gain = i, gain
        if best_i is None:
            break
        picked.append(best_i)
        covered |= solved[best_i]
        remaining.discard(best_i)
    return [matrix.protocols[i] for i in picked]


def _solver_counts(matrix) -> list[int]:
    return [sum(1 for i in range(len(matrix.protocols))
                if _solved(matrix, i, j, None))
            for j in range(len(matrix.problems))]


def sotac_scores(matrix) -> dict[Protocol, Fraction]:
    """State-of-the-art contribution, averaged.

    A problem's score is 1 over the number of protocols that solve it;
    a protocol's score is the mean over the problems it solves (0 when
    it solves none).  Rewards protocols that solve rare problems.
    """
    counts = _solver_counts(matrix)
    out = {}
    for i, p in enumerate(matrix.protocols):
        mine = [j for j in range(len(matrix.problems))
                if _solved(matrix, i, j, None)]
        if mine:
            out[p] = sum(Fraction(1, counts[j]) for j in mine) / len(mine)
        else:
            out[p] = Fraction(0)
    return out


def esotac_scores(matrix) -> dict[Protocol, Fraction]:
    """Like sotac_scores but summed, so breadth counts as well as rarity."""
    counts = _solver_counts(matrix)
    out = {}
    for i, p in enumerate(matrix.protocols):
        out[p] = sum((Fraction(1, counts[j])
                      for j in range(len(matrix.problems))
                      if _solved(matrix, i, j, None)), Fraction(0))
    return out


def build_schedule(method: ScheduleMethod, matrix,
                   loop_rate: int) -> Scheduler:
    """Select and order protocols per the method; errors if nothing
    qualifies.  ``loop_rate`` converts greedy's seconds into the loop
    threshold the covering is computed at."""
    if method.kind == "greedy":
        threshold = loops_for_seconds(method.value, loop_rate)
        protocols = greedy_cover(matrix, threshold)
        slot = method.value
    else:
        scores = (sotac_scores(matrix) if method.kind == "sotac"
                  else esotac_scores(matrix))
        ranked = sorted(
            (i for i, p in enumerate(matrix.protocols) if scores[p] > 0),
            key=lambda i: (-scores[matrix.protocols[i]], i))
        protocols = [matrix.protocols[i] for i in ranked[: method.value]]
        slot = matrix.t_eval
    if not protocols:
        raise ScheduleError(f"{method.render()} selected no protocols")
    return Scheduler(tuple(protocols), method, slot)


# ---------------------------------------------------------------------------
# Execution.


def run_schedule(s: Scheduler, problem: Problem, total_seconds: Fraction,
                 loop_rate: int) -> ProverResult:
    """Try each slot with an equal share of the budget; first proof wins.

    Unproved slots (saturated or out of resources) fold into a single
    resource_out result carrying the summed loop and inference counts.
    """
    if total_seconds <= 0:
        raise ScheduleError("total_seconds must be positive")
    per_slot = Fraction(total_seconds) / len(s.protocols)
    slot_loops = loops_for_seconds(per_slot, loop_rate)
    # loop limits carry the budget; the wall cap only backstops stalls
    limits = Limits.for_loops(slot_loops,
                              max_seconds=max(5.0, 4 * float(per_slot)))
    loops = wall = derived = 0
    for proto in s.protocols:
        r = saturate(problem, proto, limits)
        if r.proved:
            return r
        loops += r.gc_loops
        wall += r.wall_time
        derived += r.derived_count
    return ProverResult(status=ProofStatus.RESOURCE_OUT, gc_loops=loops,
                        wall_time=wall, derived_count=derived, proof=None)


# ---------------------------------------------------------------------------
# Schedule files.


def render_schedule(s: Scheduler) -> str:
    lines = [f"# schedule method={s.method.render()} "
             f"slot_seconds={render_rational(s.slot_seconds)}"]
    lines.extend(render_protocol(p) for p in s.protocols)
    return "\n".join(lines) + "\n"


def parse_schedule(text: str) -> Scheduler:
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or not lines[0].startswith("# schedule "):
        raise ScheduleError("missing schedule header")
    fields = {}
    for part in lines[0][len("# schedule "):].split():
        if "=" not in part:
            raise ScheduleError(f"malformed header field {part!r}")
        k, v = part.split("=", 1)
        fields[k] = v
    try:
        method = ScheduleMethod.parse(fields["method"])
        slot = parse_rational(fields["slot_seconds"])
    except KeyError as e:
        raise ScheduleError(f"header missing {e.args[0]}") from e
    protocols: list[Protocol] = []
    seen: set[str] = set()
    for line in lines[1:]:
        p = parse_protocol(line.strip())
        d = protocol_digest(p)
        if d in seen:  # hand-edited files may repeat a line; drop extras
            continue
        seen.add(d)
        protocols.append(p)
    if not protocols:
        raise ScheduleError("schedule file lists no protocols")
    return Scheduler(tuple(protocols), method, slot)
