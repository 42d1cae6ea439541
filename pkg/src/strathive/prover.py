"""Given-clause saturation with protocol-driven clause selection.

The engine keeps a processed set P and an unprocessed set U.  Each loop
selects a given clause from U using the protocol's CEFs (round-robin by
frequency, each CEF picking its smallest (priority, weight) clause),
moves it to P, and generates binary resolvents and factors against P.
New clauses are dropped if tautological or forward-subsumed by P or U.

The calculus is unordered binary resolution plus factoring; choosing the
KBO ordering restricts resolution to maximal literals, and a literal
selection function can override that for clauses with negative literals.
No completeness claim is made for the restricted modes.

Determinism: given equal (problem, protocol, max_loops, max_clauses) two
runs produce identical results.  The wall-clock limit is advisory (it
exists to stop runaway runs) and is the only nondeterministic cut.
"""

from __future__ import annotations

import heapq
import itertools
import re
import time
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .logic import (
    Clause,
    Literal,
    Problem,
    Role,
    Symbol,
    SymbolKind,
    Term,
    parse_problem,
    render_clause,
)
from .protocol import LiteralSelection, Ordering, Protocol, parse_protocol
from .weights import CEF, EvalContext, evaluate_cef

_RENAMED = re.compile(r"^_r(\d+)$")


# ---------------------------------------------------------------------------
# Substitutions and unification.


def resolve_term(t: Term, subst: dict[Symbol, Term]) -> Term:
    """Apply a (triangular) binding map exhaustively."""
    while t.is_var:
        b = subst.get(t.head)
        if b is None:
            return t
        t = b
    if not t.args:
        return t
    args = tuple(resolve_term(a, subst) for a in t.args)
    if all(x is y for x, y in zip(args, t.args)):
        return t
    return Term(t.head, args)


def _occurs(v: Symbol, t: Term, subst: dict[Symbol, Term]) -> bool:
    while t.is_var:
        if t.head == v:
            return True
        b = subst.get(t.head)
        if b is None:
            return False
        t = b
    return any(_occurs(v, a, subst) for a in t.args)


def unify(t1: Term, t2: Term,
          subst: Optional[dict[Symbol, Term]] = None) -> Optional[dict[Symbol, Term]]:
    """Most general unifier as a binding map, or None.

    An input ``subst`` is extended (a copy is made), so callers can unify
    several pairs under one substitution.
    """
    out = dict(subst) if subst else {}
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        while a.is_var and a.head in out:
            a = out[a.head]
        while b.is_var and b.head in out:
            b = out[b.head]
        if a is b:
            continue
        if a.is_var:
            if b.is_var and a.head == b.head:
                continue
            if _occurs(a.head, b, out):
                return None
            out[a.head] = b
        elif b.is_var:
            if _occurs(b.head, a, out):
                return None
            out[b.head] = a
        elif a.head != b.head:
            return None
        else:
            stack.extend(zip(a.args, b.args))
    return out


def match_into(pattern: Term, target: Term, subst: dict[Symbol, Term],
               trail: list[Symbol]) -> bool:
    """One-way matching: bind pattern variables so pattern == target.

    Target variables are treated as constants.  New bindings are recorded
    on ``trail`` so the caller can undo them.
    """
    stack = [(pattern, target)]
    while stack:
        p, t = stack.pop()
        if p.is_var:
            bound = subst.get(p.head)
            if bound is None:
                subst[p.head] = t
                trail.append(p.head)
            elif bound != t:
                return False
        elif t.is_var or p.head != t.head:
            return False
        else:
            stack.extend(zip(p.args, t.args))
    return True


def rename_literals(lits: Sequence[Literal], start: int) -> tuple[tuple[Literal, ...], int]:
    """Fresh `_r<n>` variables for every variable; returns the next counter."""
    mapping: dict[Symbol, Term] = {}
    counter = start

    def ren(t: Term) -> Term:
        nonlocal counter
        if t.is_var:
            nt = mapping.get(t.head)
            if nt is None:
                nt = Term(Symbol(f"_r{counter}", SymbolKind.VARIABLE, 0))
                counter += 1
                mapping[t.head] = nt
            return nt
        if not t.args:
            return t
        return Term(t.head, tuple(ren(a) for a in t.args))

    return tuple(Literal(l.polarity, ren(l.atom)) for l in lits), counter


def canonical_literals(lits: Sequence[Literal]) -> tuple[Literal, ...]:
    """Variables renamed X1, X2, ... by first occurrence.

    Clauses with the same literal order are variants iff their canonical
    forms are equal; variance across literal orders needs a subsumption
    check in both directions instead.
    """
    mapping: dict[Symbol, Term] = {}

    def ren(t: Term) -> Term:
        if t.is_var:
            nt = mapping.get(t.head)
            if nt is None:
                nt = Term(Symbol(f"X{len(mapping) + 1}", SymbolKind.VARIABLE, 0))
                mapping[t.head] = nt
            return nt
        if not t.args:
            return t
        return Term(t.head, tuple(ren(a) for a in t.args))

    return tuple(Literal(l.polarity, ren(l.atom)) for l in lits)


# ---------------------------------------------------------------------------
# Knuth-Bendix ordering, all symbol weights 1, precedence by (arity, name).


def _var_counts(t: Term) -> dict[Symbol, int]:
    out: dict[Symbol, int] = {}
    for s in t.preorder():
        if s.kind is SymbolKind.VARIABLE:
            out[s] = out.get(s, 0) + 1
    return out


def kbo_greater(s: Term, t: Term) -> bool:
    if s == t:
        return False
    sv, tv = _var_counts(s), _var_counts(t)
    for v, n in tv.items():
        if sv.get(v, 0) < n:
            return False
    if s.size != t.size:        # all weights 1 makes weight == size
        return s.size > t.size
    if s.is_var or t.is_var:
        return False
    ps = (s.head.arity, s.head.name)
    pt = (t.head.arity, t.head.name)
    if ps != pt:
        return ps > pt
    for a, b in zip(s.args, t.args):
        if a != b:
            return kbo_greater(a, b)
    return False


# ---------------------------------------------------------------------------
# Clause-level checks.


def is_tautology(lits: Sequence[Literal]) -> bool:
    pos = {l.atom for l in lits if l.polarity}
    return any(not l.polarity and l.atom in pos for l in lits)


def dedup_literals(lits: Iterable[Literal]) -> tuple[Literal, ...]:
    return tuple(dict.fromkeys(lits))


def subsumes(d: Sequence[Literal], c: Sequence[Literal],
             budget: Optional[int] = None) -> bool:
    """Does clause d subsume clause c (some instance of d is a subset)?

    The usual length restriction applies, so a clause does not subsume
    its own factors.  Matching literals one by one backtracks; ``budget``
    caps the attempted literal matches, answering False (keep the clause)
    past the cap so the engine stays out of pathological cases without
    losing determinism.
    """
    if len(d) > len(c):
        return False
    # most constrained (largest) literals first shrinks the search tree;
    # a ground literal can only match an identical atom
    ordered = sorted(d, key=lambda l: -l.atom.size)
    rows: list[tuple[Term, list[Term]]] = []
    for lit in ordered:
        atom = lit.atom
        if atom.has_var:
            row = [t.atom for t in c
                   if t.polarity == lit.polarity and t.atom.head == atom.head]
        else:
            row = [t.atom for t in c if t.polarity == lit.polarity and t.atom == atom]
        if not row:
            return False
        rows.append((atom, row))
    subst: dict[Symbol, Term] = {}
    left = budget if budget is not None else -1

    def bt(i: int) -> bool:
        nonlocal left
        if i == len(rows):
            return True
        atom, row = rows[i]
        for target in row:
            if left == 0:
                return False
            left -= 1
            trail: list[Symbol] = []
            if match_into(atom, target, subst, trail) and bt(i + 1):
                return True
            for v in trail:
                del subst[v]
        return False

    return bt(0)


def eligible_literals(c: Clause, ordering: Ordering,
                      selection: LiteralSelection) -> tuple[int, ...]:
    """Indexes of literals the clause may resolve on.

    A selection function picks one negative literal when there is any;
    otherwise KBO-maximal literals (under the kbo ordering) or all
    literals (unordered mode) are eligible.
    """
    lits = c.literals
    if selection is not LiteralSelection.NONE:
        negs = [i for i, l in enumerate(lits) if not l.polarity]
        if negs:
            if selection is LiteralSelection.SELECT_FIRST_NEG:
                return (negs[0],)
            return (max(negs, key=lambda i: lits[i].atom.size),)
    if ordering is Ordering.KBO:
        return tuple(
            i for i in range(len(lits))
            if not any(kbo_greater(lits[j].atom, lits[i].atom)
                       for j in range(len(lits)) if j != i))
    return tuple(range(len(lits)))


# ---------------------------------------------------------------------------
# Results.


class ProofStatus(str, Enum):
    PROVED = "proved"
    SATURATED = "saturated"
    RESOURCE_OUT = "resource_out"


@dataclass
class Limits:
    """Resource caps; loop and clause limits are the reproducible cut."""

    max_seconds: float = 60.0
    max_loops: int = 100_000
    max_clauses: int = 200_000
    max_memory_mb: int = 1024

    def __post_init__(self):
        if (self.max_seconds <= 0 or self.max_loops <= 0
                or self.max_clauses <= 0 or self.max_memory_mb <= 0):
            raise ValueError("all limits must be positive")

    @classmethod
    def for_loops(cls, max_loops: int, max_seconds: float = 1e9) -> "Limits":
        """Deterministic limits for tuning: generous everything but loops."""
        return cls(max_seconds=max_seconds, max_loops=max_loops,
                   max_clauses=max(2000, 40 * max_loops))


@dataclass
class ProverResult:
    status: ProofStatus
    gc_loops: int
    wall_time: float
    derived_count: int
    proof: Optional[tuple[Clause, ...]] = None

    @property
    def proved(self) -> bool:
        return self.status is ProofStatus.PROVED

    def proof_records(self) -> list[dict]:
        """Parent-id DAG of the proof, line-oriented and JSON-friendly."""
        if self.proof is None:
            return []
        return [
            {"id": c.id, "rule": c.rule, "parents": list(c.parents),
             "clause": render_clause(c)}
            for c in self.proof
        ]


# ---------------------------------------------------------------------------
# The engine.


class _CefQueue:
    """Min-heap of (priority, weight, clause id) with lazy deletion."""

    __slots__ = ("cef", "heap")

    def __init__(self, cef: CEF):
        self.cef = cef
        self.heap: list[tuple] = []

    def push(self, c: Clause, ctx: EvalContext) -> None:
        prio, weight = evaluate_cef(self.cef, c, ctx)
        heapq.heappush(self.heap, (prio, weight, c.id))

    def pop_live(self, alive: dict[int, Clause]) -> Clause:
        while True:
            _, _, cid = heapq.heappop(self.heap)
            c = alive.get(cid)
            if c is not None:
                return c


class Saturation:
    """One saturation run; owns all mutable state, single-threaded."""

    def __init__(self, problem: Problem, proto: Protocol, limits: Limits):
        self.problem = problem
        self.proto = proto
        self.limits = limits
        self.ctx = EvalContext(problem)
        self.queues = [_CefQueue(cef) for _, cef in proto.cefs]
        self.frequencies = [freq for freq, _ in proto.cefs]
        self.cef_index = 0
        self.picks_left = self.frequencies[0]
        self.last_cef_index: Optional[int] = None

        self.passive: dict[int, Clause] = {}      # U, by clause id
        self.processed: list[Clause] = []         # P, in processing order
        self.by_id: dict[int, Clause] = {}
        self.loops = 0
        self.derived_count = 0
        self.stored_symbols = 0
        # eligible P literals, split by groundness: a ground atom can only
        # unify with an equal ground atom or one containing variables
        self.var_index: dict[tuple[Symbol, bool], list[tuple[Clause, int]]] = {}
        self.ground_all: dict[tuple[Symbol, bool], list[tuple[Clause, int]]] = {}
        self.ground_exact: dict[tuple[Symbol, bool, Term], list[tuple[Clause, int]]] = {}
        # clauses never leave P∪U, so subsumption candidates are append-only:
        # (literal signature multiset, literal count, literals)
        self.stored: list[tuple[dict, int, tuple[Literal, ...]]] = []
        self.stored_canon: set[tuple[Literal, ...]] = set()
        # a stored ground unit subsumes exactly the clauses containing it
        self.ground_unit_lits: set[Literal] = set()

        self.next_id = max(c.id for c in problem.clauses) + 1
        self.rename_counter = self._init_rename_counter()
        self.empty_clause: Optional[Clause] = None

        for c in problem.clauses:
            self.by_id[c.id] = c
            self._consider_input(c)

    def _init_rename_counter(self) -> int:
        # keep fresh `_r<n>` names clear of any that appear in the input
        top = 0
        for c in self.problem.clauses:
            for lit in c.literals:
                for s in lit.atom.preorder():
                    m = _RENAMED.match(s.name)
                    if m:
                        top = max(top, int(m.group(1)) + 1)
        return top

    # -- bookkeeping

    def _consider_input(self, c: Clause) -> None:
        if c.is_empty:
            self.empty_clause = c
            return
        if is_tautology(c.literals) or self._subsumed_by_existing(
                canonical_literals(c.literals)):
            return
        self._enqueue(c)

    SUBSUMPTION_BUDGET = 600

    @staticmethod
    def _literal_multiset(lits: Sequence[Literal]) -> dict:
        out: dict = {}
        for l in lits:
            key = (l.atom.head, l.polarity)
            out[key] = out.get(key, 0) + 1
        return out

    def _subsumed_by_existing(self, lits: Sequence[Literal]) -> bool:
        # `lits` must already be canonical; exact repeats are the common case
        if lits in self.stored_canon:
            return True
        if self.ground_unit_lits and any(
                l in self.ground_unit_lits for l in lits):
            return True
        n = len(lits)
        counts = self._literal_multiset(lits)
        for sig, sn, slits in self.stored:
            if sn > n:
                continue
            # multiset prefilter: misses subsumptions that collapse repeated
            # literals, which only means keeping an occasional extra clause
            if all(counts.get(k, 0) >= v for k, v in sig.items()) and subsumes(
                    slits, lits, self.SUBSUMPTION_BUDGET):
                return True
        return False

    def _enqueue(self, c: Clause) -> None:
        self.passive[c.id] = c
        self.stored_symbols += c.symbol_count()
        lits = c.literals
        if len(lits) == 1 and not lits[0].atom.has_var:
            self.ground_unit_lits.add(lits[0])
        else:
            self.stored.append((self._literal_multiset(lits), len(lits), lits))
        self.stored_canon.add(canonical_literals(lits))
        for q in self.queues:
            q.push(c, self.ctx)

    def select_given(self) -> Clause:
        """Remove and return the next given clause (U must be nonempty)."""
        while self.picks_left == 0:
            self.cef_index = (self.cef_index + 1) % len(self.queues)
            self.picks_left = self.frequencies[self.cef_index]
        q = self.queues[self.cef_index]
        self.last_cef_index = self.cef_index
        self.picks_left -= 1
        g = q.pop_live(self.passive)
        del self.passive[g.id]
        return g

    def _add_to_processed(self, g: Clause) -> None:
        self.processed.append(g)
        self.ctx.note_processed(g)
        for i in eligible_literals(g, self.proto.ordering, self.proto.literal_selection):
            lit = g.literals[i]
            key = (lit.atom.head, lit.polarity)
            if lit.atom.has_var:
                self.var_index.setdefault(key, []).append((g, i))
            else:
                self.ground_all.setdefault(key, []).append((g, i))
                self.ground_exact.setdefault(key + (lit.atom,), []).append((g, i))

    def _partners(self, atom: Term, polarity: bool):
        """Eligible P occurrences a literal with this atom could resolve
        against: ground candidates first, then variable-containing ones."""
        key = (atom.head, not polarity)
        if atom.has_var:
            ground = self.ground_all.get(key, ())
        else:
            ground = self.ground_exact.get(key + (atom,), ())
        return itertools.chain(ground, self.var_index.get(key, ()))

    # -- inference

    def _make_clause(self, lits: tuple[Literal, ...], rule: str,
                     parents: tuple[int, ...], goal_parent: bool) -> Clause:
        cid = self.next_id
        self.next_id += 1
        goal = goal_parent and any(not l.polarity for l in lits)
        return Clause(id=cid, literals=lits, role=Role.DERIVED, created_at=cid,
                      parents=parents, goal=goal, rule=rule)

    def _derive(self, lits_raw: Iterable[Literal], subst: dict[Symbol, Term],
                rule: str, parents: tuple[int, ...], goal_parent: bool) -> Optional[Clause]:
        self.derived_count += 1
        lits = dedup_literals(
            Literal(l.polarity, resolve_term(l.atom, subst)) for l in lits_raw)
        if is_tautology(lits):
            return None
        lits = canonical_literals(lits)
        if lits and self._subsumed_by_existing(lits):
            return None
        return self._make_clause(lits, rule, parents, goal_parent)

    def generate(self, g: Clause) -> list[Clause]:
        """All kept inferences between g and P (which already includes g)."""
        out: list[Clause] = []
        ordering, selection = self.proto.ordering, self.proto.literal_selection
        renamed_cache: dict[int, tuple[Literal, ...]] = {}
        for i in eligible_literals(g, ordering, selection):
            lit = g.literals[i]
            for partner, j in self._partners(lit.atom, lit.polarity):
                renamed = renamed_cache.get(partner.id)
                if renamed is None:
                    renamed, self.rename_counter = rename_literals(
                        partner.literals, self.rename_counter)
                    renamed_cache[partner.id] = renamed
                subst = unify(lit.atom, renamed[j].atom)
                if subst is None:
                    continue
                rest = [l for k, l in enumerate(g.literals) if k != i]
                rest += [l for k, l in enumerate(renamed) if k != j]
                child = self._derive(rest, subst, "resolve",
                                     (g.id, partner.id), g.goal or partner.goal)
                if child is not None:
                    out.append(child)
                    if child.is_empty:
                        return out
            if self.next_id >= self.limits.max_clauses:
                return out
        for i, j in itertools.combinations(range(len(g.literals)), 2):
            li, lj = g.literals[i], g.literals[j]
            if li.polarity != lj.polarity or li.atom.head != lj.atom.head:
                continue
            subst = unify(li.atom, lj.atom)
            if subst is None:
                continue
            rest = [l for k, l in enumerate(g.literals) if k != j]
            child = self._derive(rest, subst, "factor", (g.id,), g.goal)
            if child is not None:
                out.append(child)
        return out

    # -- main loop

    def _out_of_resources(self, start: float) -> bool:
        if self.loops >= self.limits.max_loops:
            return True
        if self.next_id >= self.limits.max_clauses:
            return True
        if self.stored_symbols > self.limits.max_memory_mb * 5000:
            return True
        return time.monotonic() - start > self.limits.max_seconds

    def run(self) -> ProverResult:
        start = time.monotonic()
        if self.empty_clause is not None:
            return self._finish(ProofStatus.PROVED, start)
        while self.passive:
            if self._out_of_resources(start):
                return self._finish(ProofStatus.RESOURCE_OUT, start)
            g = self.select_given()
            self.loops += 1
            self._add_to_processed(g)
            for child in self.generate(g):
                self.by_id[child.id] = child
                if child.is_empty:
                    self.empty_clause = child
                    return self._finish(ProofStatus.PROVED, start)
                self._enqueue(child)
        return self._finish(ProofStatus.SATURATED, start)

    def _finish(self, status: ProofStatus, start: float) -> ProverResult:
        proof = None
        if status is ProofStatus.PROVED:
            keep: set[int] = set()
            todo = [self.empty_clause.id]
            while todo:
                cid = todo.pop()
                if cid in keep:
                    continue
                keep.add(cid)
                todo.extend(self.by_id[cid].parents)
            proof = tuple(self.by_id[cid] for cid in sorted(keep))
        return ProverResult(status=status, gc_loops=self.loops,
                            wall_time=time.monotonic() - start,
                            derived_count=self.derived_count, proof=proof)


def saturate(problem: Problem, proto: Protocol, limits: Limits) -> ProverResult:
    return Saturation(problem, proto, limits).run()


def generate(g: Clause, processed: Iterable[Clause],
             ordering: Ordering = Ordering.NONE,
             selection: LiteralSelection = LiteralSelection.NONE) -> list[Clause]:
    """Standalone inference step: binary resolvents of g with each clause of
    processed plus g itself, then factors of g.  Results are deduplicated,
    tautology-filtered, and subsumption-checked against the inputs and the
    earlier results.  The engine uses an indexed variant of the same logic.
    """
    partners = [g] + [c for c in processed if c.id != g.id]
    counter = 0
    for c in partners:
        for lit in c.literals:
            for s in lit.atom.preorder():
                m = _RENAMED.match(s.name)
                if m:
                    counter = max(counter, int(m.group(1)) + 1)
    next_id = max(c.id for c in partners) + 1
    kept: list[Clause] = []

    def filtered(lits_raw: list[Literal], subst: dict[Symbol, Term],
                 rule: str, parents: tuple[int, ...],
                 goal_parent: bool) -> None:
        nonlocal next_id
        lits = dedup_literals(
            Literal(l.polarity, resolve_term(l.atom, subst)) for l in lits_raw)
        if is_tautology(lits):
            return
        lits = canonical_literals(lits)
        for old in itertools.chain(partners, kept):
            if len(old.literals) <= len(lits) and subsumes(old.literals, lits):
                return
        goal = goal_parent and any(not l.polarity for l in lits)
        kept.append(Clause(id=next_id, literals=lits, role=Role.DERIVED,
                           created_at=next_id, parents=parents, goal=goal,
                           rule=rule))
        next_id += 1

    for i in eligible_literals(g, ordering, selection):
        lit = g.literals[i]
        for partner in partners:
            for j in eligible_literals(partner, ordering, selection):
                plit = partner.literals[j]
                if plit.polarity == lit.polarity or plit.atom.head != lit.atom.head:
                    continue
                renamed, counter2 = rename_literals(partner.literals, counter)
                subst = unify(lit.atom, renamed[j].atom)
                if subst is None:
                    continue
                counter = counter2
                rest = [l for k, l in enumerate(g.literals) if k != i]
                rest += [l for k, l in enumerate(renamed) if k != j]
                filtered(rest, subst, "resolve", (g.id, partner.id),
                         g.goal or partner.goal)
    for i, j in itertools.combinations(range(len(g.literals)), 2):
        li, lj = g.literals[i], g.literals[j]
        if li.polarity != lj.polarity or li.atom.head != lj.atom.head:
            continue
        subst = unify(li.atom, lj.atom)
        if subst is None:
            continue
        rest = [l for k, l in enumerate(g.literals) if k != j]
        filtered(rest, subst, "factor", (g.id,), g.goal)
    return kept


# ---------------------------------------------------------------------------
# Calibration: loops per second on a fixed busy micro-problem.


CALIBRATION_PROTOCOL = "-tNONE -Wnone -H'(1*FIFOWeight(PreferAll))'"


def calibration_problem(n: int = 16) -> Problem:
    """Transitive closure over an n-node path with an unreachable goal;
    saturation keeps deriving longer paths, giving a steady workload."""
    lines = [f"cnf(e{i},axiom,edge(n{i},n{i + 1}))." for i in range(1, n)]
    lines.append("cnf(t,axiom,~edge(X,Y)|~edge(Y,Z)|edge(X,Z)).")
    lines.append("cnf(goal,negated_conjecture,~edge(n2,n1)).")
    return parse_problem("\n".join(lines), name="calibration")


def measure_loop_rate(budget_seconds: float = 0.5,
                      floor: int = 50, ceiling: int = 200_000) -> int:
    """Measured given-clause loops per second, clamped to sane bounds."""
    problem = calibration_problem()
    proto = parse_protocol(CALIBRATION_PROTOCOL)
    limits = Limits(max_seconds=budget_seconds, max_loops=10 ** 9,
                    max_clauses=10 ** 9, max_memory_mb=4096)
    result = saturate(problem, proto, limits)
    elapsed = max(result.wall_time, 1e-6)
    rate = int(result.gc_loops / elapsed)
    return max(floor, min(ceiling, rate))


def loops_for_seconds(seconds: Fraction, rate: int) -> int:
    return max(1, int(seconds * rate))
