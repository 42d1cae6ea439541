"""Clause evaluation functions: priorities, weight functions, distances.

A clause evaluation function (CEF) pairs a priority function with a weight
function and its arguments; the prover picks the clause with the smallest
(priority, weight) lexicographically.  All weights are exact ``Fraction``
values except the tf-idf family, which needs a logarithm and stays in
floating point.  Several weight functions measure similarity of clause
subterms to the conjecture; their distance kernels live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Optional, Union

from .logic import (
    Clause,
    Problem,
    Role,
    Symbol,
    SymbolKind,
    Term,
    subterm_occurrences,
)

Weight = Union[Fraction, float]


class CefError(ValueError):
    """Malformed CEF text or ill-typed weight-function arguments."""


# ---------------------------------------------------------------------------
# Exact rationals on the wire.


def parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise CefError(f"bad rational {text!r}") from e


def render_rational(q: Fraction) -> str:
    """Exact text form: decimal when the denominator is 2^a*5^b, else n/d."""
    den = q.denominator
    d2 = d5 = 0
    while den % 2 == 0:
        den //= 2
        d2 += 1
    while den % 5 == 0:
        den //= 5
        d5 += 1
    if den != 1:
        return f"{q.numerator}/{q.denominator}"
    shift = max(d2, d5)
    scaled = q.numerator * 10 ** shift // q.denominator
    if shift == 0:
        return str(scaled)
    digits = str(abs(scaled)).rjust(shift + 1, "0")
    sign = "-" if scaled < 0 else ""
    return f"{sign}{digits[:-shift]}.{digits[-shift:]}"


def _rat(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, str)):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10 ** 9)
    raise CefError(f"cannot read {v!r} as a rational")


# ---------------------------------------------------------------------------
# Priority functions.


class PriorityFn(str, Enum):
    PREFER_ALL = "PreferAll"
    PREFER_GOALS = "PreferGoals"
    PREFER_NON_GOALS = "PreferNonGoals"
    BY_CREATION_DATE = "ByCreationDate"
    PREFER_UNIT_GROUND_GOALS = "PreferUnitGroundGoals"


def clause_priority(pf: PriorityFn, c: Clause) -> int:
    """Integer pre-order; smaller is preferred."""
    if pf is PriorityFn.PREFER_ALL:
        return 0
    if pf is PriorityFn.BY_CREATION_DATE:
        return c.created_at
    if pf is PriorityFn.PREFER_GOALS:
        return 0 if c.goal else 1
    if pf is PriorityFn.PREFER_NON_GOALS:
        return 1 if c.goal else 0
    if pf is PriorityFn.PREFER_UNIT_GROUND_GOALS:
        return 0 if (c.goal and c.is_unit and c.is_ground) else 1
    raise CefError(f"unknown priority function {pf!r}")


# ---------------------------------------------------------------------------
# Weight-function argument records.


class DocSource(str, Enum):
    AX = "ax"    # input axiom clauses
    PRO = "pro"  # processed clauses, maintained by the prover


def _require_nonneg(obj, *names):
    for n in names:
        if getattr(obj, n) < 0:
            raise CefError(f"{type(obj).__name__}.{n} must be non-negative")


@dataclass(frozen=True)
class ConjSymbolArgs:
    """gamma_conj scales symbols occurring in the conjecture; c_* by kind."""

    gamma_conj: Fraction
    c_f: Fraction
    c_c: Fraction
    c_p: Fraction
    c_v: Fraction

    def __post_init__(self):
        if self.gamma_conj <= 0:
            raise CefError("gamma_conj must be positive")
        _require_nonneg(self, "c_f", "c_c", "c_p", "c_v")


@dataclass(frozen=True)
class TermArgs(ConjSymbolArgs):
    """Same coefficients, applied per subterm shared with the conjecture."""


@dataclass(frozen=True)
class TfIdfArgs:
    doc_source: DocSource


@dataclass(frozen=True)
class PrefArgs:
    c_match: Fraction
    c_miss: Fraction

    def __post_init__(self):
        _require_nonneg(self, "c_match", "c_miss")


@dataclass(frozen=True)
class EditArgs:
    c_ins: Fraction
    c_del: Fraction
    c_ch: Fraction

    def __post_init__(self):
        _require_nonneg(self, "c_ins", "c_del", "c_ch")


@dataclass(frozen=True)
class StrucArgs:
    c_miss: Fraction
    c_inst: Fraction
    c_gen: Fraction

    def __post_init__(self):
        _require_nonneg(self, "c_miss", "c_inst", "c_gen")


@dataclass(frozen=True)
class ClauseweightArgs:
    # c_f/c_v may be negative (rewards large clauses); seen in the wild
    c_f: Fraction
    c_v: Fraction
    pos_mult: Fraction


@dataclass(frozen=True)
class RefinedweightArgs:
    c_f: Fraction
    c_v: Fraction
    term_pen: Fraction
    lit_pen: Fraction
    pos_mult: Fraction


@dataclass(frozen=True)
class WeightFnSpec:
    """Registry row: wire name, args record type, per-arg tuning domains."""

    name: str
    args_cls: Optional[type]
    arg_types: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.arg_types)


# Declaration order is load-bearing: collection refresh round-robins over
# weight functions in this order, and ties break lexicographically later.
WEIGHT_FUNCTIONS: dict[str, WeightFnSpec] = {
    s.name: s
    for s in [
        WeightFnSpec("ConjectureSymbolWeight", ConjSymbolArgs,
                     ("multiplier", "symbol_weight", "symbol_weight",
                      "symbol_weight", "symbol_weight")),
        WeightFnSpec("Term", TermArgs,
                     ("multiplier", "symbol_weight", "symbol_weight",
                      "symbol_weight", "symbol_weight")),
        WeightFnSpec("Tfidf", TfIdfArgs, ("doc_source",)),
        WeightFnSpec("Pref", PrefArgs, ("cost", "cost")),
        WeightFnSpec("Lev", EditArgs, ("cost", "cost", "cost")),
        WeightFnSpec("Ted", EditArgs, ("cost", "cost", "cost")),
        WeightFnSpec("Struc", StrucArgs, ("cost", "cost", "cost")),
        WeightFnSpec("Clauseweight", ClauseweightArgs,
                     ("signed", "signed", "multiplier")),
        WeightFnSpec("Refinedweight", RefinedweightArgs,
                     ("symbol_weight", "symbol_weight", "multiplier",
                      "multiplier", "multiplier")),
        WeightFnSpec("FIFOWeight", None, ()),
        WeightFnSpec("ByAge", None, ()),
    ]
}


@dataclass(frozen=True)
class WeightFn:
    """A tagged weight function: registry name plus its argument record."""

    name: str
    args: object = None

    def __post_init__(self):
        spec = WEIGHT_FUNCTIONS.get(self.name)
        if spec is None:
            raise CefError(f"unknown weight function {self.name!r}")
        if spec.args_cls is None:
            if self.args is not None:
                raise CefError(f"{self.name} takes no arguments")
        elif not isinstance(self.args, spec.args_cls):
            raise CefError(
                f"{self.name} needs {spec.args_cls.__name__}, got {type(self.args).__name__}")

    def arg_values(self) -> tuple:
        """Argument values in wire order (empty for argument-free functions)."""
        if self.args is None:
            return ()
        return tuple(getattr(self.args, f.name) for f in fields(self.args))

    def arg_names(self) -> tuple[str, ...]:
        if self.args is None:
            return ()
        return tuple(f.name for f in fields(self.args))


def make_weight_fn(name: str, values: Iterable) -> WeightFn:
    """Build a WeightFn from wire-ordered argument values, with type checks."""
    spec = WEIGHT_FUNCTIONS.get(name)
    if spec is None:
        raise CefError(f"unknown weight function {name!r}")
    vals = list(values)
    if len(vals) != spec.arity:
        raise CefError(f"{name} takes {spec.arity} arguments, got {len(vals)}")
    if spec.args_cls is None:
        return WeightFn(name)
    coerced = []
    for v, t in zip(vals, spec.arg_types):
        if t == "doc_source":
            if isinstance(v, DocSource):
                coerced.append(v)
            else:
                try:
                    coerced.append(DocSource(str(v)))
                except ValueError as e:
                    raise CefError(f"bad document source {v!r}") from e
        else:
            coerced.append(_rat(v))
    try:
        return WeightFn(name, spec.args_cls(*coerced))
    except TypeError as e:
        raise CefError(str(e)) from e


@dataclass(frozen=True)
class CEF:
    priority: PriorityFn
    weight: WeightFn


def parse_cef(text: str) -> CEF:
    """Read ``WeightFunction(PriorityFunction,arg1,...,argk)``."""
    s = text.strip()
    lp = s.find("(")
    if lp < 0 or not s.endswith(")"):
        raise CefError(f"malformed CEF {text!r}")
    name = s[:lp].strip()
    inner = s[lp + 1:-1]
    parts = [p.strip() for p in inner.split(",")] if inner.strip() else []
    if not parts:
        raise CefError(f"CEF {text!r} is missing a priority function")
    try:
        prio = PriorityFn(parts[0])
    except ValueError as e:
        raise CefError(f"unknown priority function {parts[0]!r}") from e
    spec = WEIGHT_FUNCTIONS.get(name)
    if spec is None:
        raise CefError(f"unknown weight function {name!r}")
    raw_args = []
    for p, t in zip(parts[1:], spec.arg_types):
        raw_args.append(p if t == "doc_source" else parse_rational(p))
    if len(parts) - 1 != spec.arity:
        raise CefError(f"{name} takes {spec.arity} arguments, got {len(parts) - 1}")
    return CEF(prio, make_weight_fn(name, raw_args))


def render_cef(cef: CEF) -> str:
    parts = [cef.priority.value]
    spec = WEIGHT_FUNCTIONS[cef.weight.name]
    for v, t in zip(cef.weight.arg_values(), spec.arg_types):
        parts.append(v.value if t == "doc_source" else render_rational(v))
    return f"{cef.weight.name}({','.join(parts)})"


# ---------------------------------------------------------------------------
# Distance kernels.


def shared_prefix_len(t: Term, conj: Iterable[Term]) -> int:
    """Longest common preorder-prefix of ``t`` with any conjecture term."""
    seq = t.preorder()
    best = 0
    for other in conj:
        oseq = other.preorder()
        n = min(len(seq), len(oseq))
        k = 0
        while k < n and seq[k] == oseq[k]:
            k += 1
        if k > best:
            best = k
    return best


def pref_term_weight(t: Term, conj: Iterable[Term], a: PrefArgs) -> Fraction:
    matched = shared_prefix_len(t, conj)
    return a.c_match * matched + a.c_miss * (t.size - matched)


def lev_distance(s1, s2, a: EditArgs) -> Fraction:
    """Weighted Levenshtein distance between two symbol sequences.

    c_del removes from s1, c_ins inserts into s1, c_ch substitutes; the
    classic O(|s1|*|s2|) dynamic program, one row at a time.
    """
    prev = [a.c_ins * j for j in range(len(s2) + 1)]
    for i, x in enumerate(s1, 1):
        cur = [a.c_del * i]
        for j, y in enumerate(s2, 1):
            best = prev[j - 1] if x == y else prev[j - 1] + a.c_ch
            up = prev[j] + a.c_del
            if up < best:
                best = up
            left = cur[j - 1] + a.c_ins
            if left < best:
                best = left
            cur.append(best)
        prev = cur
    return prev[-1]


class _TedView:
    """Postorder view of a term for tree edit distance: labels, leftmost
    leaf descendants, and keyroots (nodes without a left sibling path)."""

    __slots__ = ("labels", "lmld", "keyroots")

    def __init__(self, t: Term):
        labels: list[Symbol] = []
        lmld: list[int] = []

        def walk(node: Term) -> int:
            first = None
            for child in node.args:
                lm = walk(child)
                if first is None:
                    first = lm
            idx = len(labels)
            labels.append(node.head)
            lmld.append(first if first is not None else idx)
            return lmld[idx]

        walk(t)
        seen: set[int] = set()
        keyroots: list[int] = []
        for i in range(len(labels) - 1, -1, -1):
            if lmld[i] not in seen:
                seen.add(lmld[i])
                keyroots.append(i)
        keyroots.reverse()
        self.labels = labels
        self.lmld = lmld
        self.keyroots = keyroots


def ted_distance(t1: Term, t2: Term, a: EditArgs) -> Fraction:
    """Ordered tree edit distance (Zhang-Shasha) with per-node costs.

    Deleting a node reconnects its children in place; insertion is the
    mirror image; renaming charges c_ch for a label change.
    """
    A, B = _TedView(t1), _TedView(t2)
    la, lb = A.lmld, B.lmld
    zero = Fraction(0)
    td: list[list[Optional[Fraction]]] = [
        [None] * len(B.labels) for _ in A.labels
    ]
    for i in A.keyroots:
        for j in B.keyroots:
            m = i - la[i] + 2
            n = j - lb[j] + 2
            fd = [[zero] * n for _ in range(m)]
            for x in range(1, m):
                fd[x][0] = fd[x - 1][0] + a.c_del
            for y in range(1, n):
                fd[0][y] = fd[0][y - 1] + a.c_ins
            for x in range(1, m):
                ai = la[i] + x - 1
                whole_a = la[ai] == la[i]
                for y in range(1, n):
                    bj = lb[j] + y - 1
                    best = fd[x - 1][y] + a.c_del
                    cand = fd[x][y - 1] + a.c_ins
                    if cand < best:
                        best = cand
                    if whole_a and lb[bj] == lb[j]:
                        rename = zero if A.labels[ai] == B.labels[bj] else a.c_ch
                        cand = fd[x - 1][y - 1] + rename
                        if cand < best:
                            best = cand
                        fd[x][y] = best
                        td[ai][bj] = best
                    else:
                        cand = fd[la[ai] - la[i]][lb[bj] - lb[j]] + td[ai][bj]
                        if cand < best:
                            best = cand
                        fd[x][y] = best
    return td[-1][-1]


def struc_distance(t1: Term, t2: Term, a: StrucArgs) -> Fraction:
    """Structural generalize/instantiate distance.

    Instantiating a variable to a term costs c_inst per target symbol,
    generalizing a term to a variable c_gen per source symbol; a clash of
    heads routes through a fresh intermediate variable, and two distinct
    variables cost c_miss.
    """
    if t1.is_var:
        if t2.is_var:
            return Fraction(0) if t1.head == t2.head else a.c_miss
        return a.c_inst * t2.size
    if t2.is_var:
        return a.c_gen * t1.size
    if t1.head == t2.head:
        total = Fraction(0)
        for x, y in zip(t1.args, t2.args):
            total += struc_distance(x, y, a)
        return total
    return a.c_gen * t1.size + a.c_inst * t2.size


# ---------------------------------------------------------------------------
# tf-idf bookkeeping.


class TfIdfContext:
    """Document-frequency counts over one clause collection.

    ``tf`` maps a term to its occurrence count in the conjecture and is
    shared between sources; ``df`` counts documents (clauses) containing
    the term at any subterm position.
    """

    __slots__ = ("tf", "n_docs", "df")

    def __init__(self, tf: dict[Term, int]):
        self.tf = tf
        self.n_docs = 0
        self.df: dict[Term, int] = {}

    def add_document(self, c: Clause) -> None:
        self.n_docs += 1
        seen: set[Term] = set()
        for lit in c.literals:
            for t in subterm_occurrences(lit.atom):
                if t not in seen:
                    seen.add(t)
                    self.df[t] = self.df.get(t, 0) + 1


def tfidf_value(t: Term, ctx: TfIdfContext) -> float:
    tf = ctx.tf.get(t, 0)
    if tf == 0:
        return 0.0
    return tf * math.log((1 + ctx.n_docs) / (1 + ctx.df.get(t, 0)))


# ---------------------------------------------------------------------------
# Evaluation context and clause weights.


class EvalContext:
    """Read-mostly problem state consulted by weight evaluation.

    Construction extracts the conjecture term/symbol tables and indexes the
    axioms for tf-idf.  The prover appends processed clauses between
    given-clause loops via :meth:`note_processed`; everything else is
    immutable, so concurrent clause evaluations may share a context.
    """

    def __init__(self, problem: Problem):
        self.problem = problem
        tf: dict[Term, int] = {}
        conj_list: dict[Term, None] = {}
        for cl in problem.conjecture_clauses():
            for lit in cl.literals:
                for t in subterm_occurrences(lit.atom):
                    tf[t] = tf.get(t, 0) + 1
                    conj_list[t] = None
        self.conj_list: tuple[Term, ...] = tuple(conj_list)
        self.conj_terms: frozenset[Term] = frozenset(conj_list)
        self.conj_symbols: frozenset[Symbol] = frozenset(
            t.head for t in self.conj_terms)
        self.tfidf_ax = TfIdfContext(tf)
        for cl in problem.clauses:
            if cl.role is Role.AXIOM:
                self.tfidf_ax.add_document(cl)
        self.tfidf_pro = TfIdfContext(tf)
        self._memos: dict[tuple, dict[Term, Weight]] = {}

    def tfidf(self, source: DocSource) -> TfIdfContext:
        return self.tfidf_ax if source is DocSource.AX else self.tfidf_pro

    def note_processed(self, c: Clause) -> None:
        """Register ``c`` as a processed-clause document for tf-idf(pro)."""
        self.tfidf_pro.add_document(c)
        stale = [k for k in self._memos
                 if k[0] == "Tfidf" and k[1].doc_source is DocSource.PRO]
        for k in stale:
            del self._memos[k]

    def memo_for(self, wf: WeightFn) -> dict[Term, Weight]:
        key = (wf.name, wf.args)
        m = self._memos.get(key)
        if m is None:
            m = {}
            self._memos[key] = m
        return m


def _subtree_sum(t: Term, term_fn: Callable[[Term], Weight],
                 memo: dict[Term, Weight]) -> Weight:
    # total of term_fn over every subterm occurrence of t
    val = memo.get(t)
    if val is None:
        val = term_fn(t)
        for arg in t.args:
            val = val + _subtree_sum(arg, term_fn, memo)
        memo[t] = val
    return val


def _symbol_weight(sym: Symbol, a: ConjSymbolArgs) -> Fraction:
    if sym.kind is SymbolKind.FUNCTION:
        return a.c_f
    if sym.kind is SymbolKind.CONSTANT:
        return a.c_c
    if sym.kind is SymbolKind.PREDICATE:
        return a.c_p
    return a.c_v


def _symbol_count_weight(c: Clause, a) -> list[Fraction]:
    # per-literal c_f * non-variable + c_v * variable occurrence counts
    out = []
    for lit in c.literals:
        n_var = 0
        n_other = 0
        for s in lit.atom.preorder():
            if s.kind is SymbolKind.VARIABLE:
                n_var += 1
            else:
                n_other += 1
        out.append(a.c_f * n_other + a.c_v * n_var)
    return out


def _term_weight_fn(wf: WeightFn, ctx: EvalContext) -> Callable[[Term], Weight]:
    a = wf.args
    name = wf.name
    if name == "ConjectureSymbolWeight":
        syms = ctx.conj_symbols

        def term_fn(t: Term) -> Fraction:
            w = _symbol_weight(t.head, a)
            return w * a.gamma_conj if t.head in syms else w
    elif name == "Term":
        conj = ctx.conj_terms

        def term_fn(t: Term) -> Fraction:
            w = _symbol_weight(t.head, a)
            return w * a.gamma_conj if t in conj else w
    elif name == "Tfidf":
        tctx = ctx.tfidf(a.doc_source)

        def term_fn(t: Term) -> float:
            return 1.0 / (1.0 + tfidf_value(t, tctx))
    elif name == "Pref":
        conj_seq = ctx.conj_list

        def term_fn(t: Term) -> Fraction:
            return pref_term_weight(t, conj_seq, a)
    elif name in ("Lev", "Ted"):
        conj_seq = ctx.conj_list
        # no conjecture: a flat out-of-reach distance, still size-proportional
        miss = 2 * max(a.c_ins, a.c_del, a.c_ch)
        if name == "Lev":
            def term_fn(t: Term) -> Fraction:
                if not conj_seq:
                    return miss * t.size
                return min(lev_distance(t.preorder(), s.preorder(), a)
                           for s in conj_seq)
        else:
            def term_fn(t: Term) -> Fraction:
                if not conj_seq:
                    return miss * t.size
                return min(ted_distance(t, s, a) for s in conj_seq)
    elif name == "Struc":
        conj_seq = ctx.conj_list

        def term_fn(t: Term) -> Fraction:
            if not conj_seq:
                return a.c_gen * t.size
            return min(struc_distance(t, s, a) for s in conj_seq)
    else:
        raise CefError(f"{name} has no per-term weight")
    return term_fn


_CONTEXT_FREE = {"FIFOWeight", "ByAge", "Clauseweight", "Refinedweight"}


def clause_weight(wf: WeightFn, c: Clause, ctx: Optional[EvalContext] = None) -> Weight:
    name = wf.name
    if name in ("FIFOWeight", "ByAge"):
        return Fraction(c.created_at)
    if name == "Clauseweight":
        a = wf.args
        total = Fraction(0)
        for lit, w in zip(c.literals, _symbol_count_weight(c, a)):
            total += w * a.pos_mult if lit.polarity else w
        return total
    if name == "Refinedweight":
        a = wf.args
        max_atom = max((lit.atom.size for lit in c.literals), default=0)
        total = Fraction(0)
        for lit, w in zip(c.literals, _symbol_count_weight(c, a)):
            w = w * a.term_pen
            if lit.atom.size == max_atom:
                w = w * a.lit_pen
            if lit.polarity:
                w = w * a.pos_mult
            total += w
        return total
    if ctx is None:
        raise CefError(f"{name} requires an evaluation context")
    term_fn = _term_weight_fn(wf, ctx)
    memo = ctx.memo_for(wf)
    total: Optional[Weight] = None
    for lit in c.literals:
        v = _subtree_sum(lit.atom, term_fn, memo)
        total = v if total is None else total + v
    return Fraction(0) if total is None else total


def evaluate_cef(cef: CEF, c: Clause, ctx: Optional[EvalContext] = None):
    """The (priority, weight) pair the prover minimizes lexicographically."""
    return (clause_priority(cef.priority, c), clause_weight(cef.weight, c, ctx))
