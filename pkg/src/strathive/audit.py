"""Independent soundness audit for emitted proofs.

Re-derives every step of a proof from its recorded parents using a
self-contained unifier, ignoring the ordering and selection restrictions
the prover searched under (any sound inference justifies a step).  The
code deliberately shares nothing with the search engine beyond the term
types, so a bug there cannot hide here.
"""

from __future__ import annotations

import itertools
from typing import Optional, Sequence

from .logic import Clause, Literal, Problem, Role, Symbol, SymbolKind, Term


class AuditError(Exception):
    """A proof step that could not be justified."""


def _substitute(t: Term, env: dict[Symbol, Term]) -> Term:
    seen = set()
    while t.is_var and t.head in env:
        if t.head in seen:       # defensive; a sound unifier never builds cycles
            raise AuditError(f"cyclic binding through {t.head.name}")
        seen.add(t.head)
        t = env[t.head]
    if t.is_var or not t.args:
        return t
    return Term(t.head, tuple(_substitute(a, env) for a in t.args))


def _unify(a: Term, b: Term, env: dict[Symbol, Term]) -> Optional[dict[Symbol, Term]]:
    while a.is_var and a.head in env:
        a = env[a.head]
    while b.is_var and b.head in env:
        b = env[b.head]
    if a.is_var and b.is_var and a.head == b.head:
        return env
    if a.is_var:
        if a.head in {s for s in _substitute(b, env).preorder()}:
            return None
        out = dict(env)
        out[a.head] = b
        return out
    if b.is_var:
        return _unify(b, a, env)
    if a.head != b.head:
        return None
    for x, y in zip(a.args, b.args):
        env2 = _unify(x, y, env)
        if env2 is None:
            return None
        env = env2
    return env


def _match(pattern: Term, target: Term,
           env: dict[Symbol, Term]) -> Optional[dict[Symbol, Term]]:
    if pattern.is_var:
        bound = env.get(pattern.head)
        if bound is None:
            out = dict(env)
            out[pattern.head] = target
            return out
        return env if bound == target else None
    if target.is_var or pattern.head != target.head:
        return None
    for x, y in zip(pattern.args, target.args):
        env2 = _match(x, y, env)
        if env2 is None:
            return None
        env = env2
    return env


def _instance_subset(small: Sequence[Literal], big: Sequence[Literal],
                     env: dict[Symbol, Term], i: int = 0) -> bool:
    if i == len(small):
        return True
    lit = small[i]
    for other in big:
        if other.polarity != lit.polarity:
            continue
        env2 = _match(lit.atom, other.atom, env)
        if env2 is not None and _instance_subset(small, big, env2, i + 1):
            return True
    return False


def variants(a: Sequence[Literal], b: Sequence[Literal]) -> bool:
    """Equal up to variable renaming and literal order (duplicate-free sides)."""
    return (len(a) == len(b)
            and _instance_subset(a, b, {})
            and _instance_subset(b, a, {}))


_FRESH = "_audit"


def _rename(lits: Sequence[Literal], tag: str) -> list[Literal]:
    table: dict[Symbol, Term] = {}

    def walk(t: Term) -> Term:
        if t.is_var:
            if t.head not in table:
                table[t.head] = Term(
                    Symbol(f"{_FRESH}_{tag}_{len(table)}", SymbolKind.VARIABLE, 0))
            return table[t.head]
        if not t.args:
            return t
        return Term(t.head, tuple(walk(a) for a in t.args))

    return [Literal(l.polarity, walk(l.atom)) for l in lits]


def _dedup(lits: Sequence[Literal]) -> list[Literal]:
    return list(dict.fromkeys(lits))


def possible_resolvents(a: Clause, b: Clause) -> list[list[Literal]]:
    """Every unrestricted binary resolvent of the two clauses."""
    out: list[list[Literal]] = []
    left = _rename(a.literals, "l")
    right = _rename(b.literals, "r")
    for i, li in enumerate(left):
        for j, rj in enumerate(right):
            if li.polarity == rj.polarity or li.atom.head != rj.atom.head:
                continue
            env = _unify(li.atom, rj.atom, {})
            if env is None:
                continue
            merged = [l for k, l in enumerate(left) if k != i]
            merged += [l for k, l in enumerate(right) if k != j]
            out.append(_dedup(
                Literal(l.polarity, _substitute(l.atom, env)) for l in merged))
    return out

def possible_factors(a: Clause) -> list[list[Literal]]:
    """Every unrestricted binary factor of the clause."""
    out: list[list[Literal]] = []
    lits = _rename(a.literals, "f")
    for i, j in itertools.combinations(range(len(lits)), 2):
        if lits[i].polarity != lits[j].polarity:
            continue
        env = _unify(lits[i].atom, lits[j].atom, {})
        if env is None:
            continue
        kept = [l for k, l in enumerate(lits) if k != j]
        out.append(_dedup(
            Literal(l.polarity, _substitute(l.atom, env)) for l in kept))
    return out


def audit_proof(problem: Problem, proof: Sequence[Clause]) -> int:
    """Check a proof bottom to top; returns the number of checked steps.

    Raises :class:`AuditError` on the first unjustifiable step.  A valid
    proof ends in the empty clause, contains every ancestor it references,
    and each derived clause is a variant of some unrestricted resolvent or
    factor of its recorded parents.
    """
    if not proof:
        raise AuditError("empty proof")
    if not proof[-1].is_empty:
        raise AuditError("proof does not end in the empty clause")
    inputs = {c.id: c for c in problem.clauses}
    seen: dict[int, Clause] = {}
    checked = 0
    for c in proof:
        if c.role is not Role.DERIVED:
            original = inputs.get(c.id)
            if original is None or original.literals != c.literals:
                raise AuditError(f"clause {c.id} does not match any input clause")
            seen[c.id] = c
            checked += 1
            continue
        parents = []
        for pid in c.parents:
            p = seen.get(pid)
            if p is None:
                raise AuditError(f"clause {c.id} references unknown parent {pid}")
            parents.append(p)
        if c.rule == "resolve" and len(parents) == 2:
            candidates = possible_resolvents(parents[0], parents[1])
        elif c.rule == "factor" and len(parents) == 1:
            candidates = possible_factors(parents[0])
        else:
            raise AuditError(f"clause {c.id}: unrecognized rule {c.rule!r} "
                             f"with {len(parents)} parents")
        if not any(variants(c.literals, cand) for cand in candidates):
            raise AuditError(f"clause {c.id} is not derivable from its parents")
        seen[c.id] = c
        checked += 1
    return checked
