"""First-order CNF syntax: symbols, terms, literals, clauses, problems.

Problems are read from a small TPTP-style surface syntax::

    % a comment
    cnf(name, axiom, p(X) | ~q(f(X), a)).
    cnf(goal, negated_conjecture, ~p(a)).

Accepted roles are ``axiom``, ``hypothesis`` (treated as axiom) and
``negated_conjecture``.  Equality is an ordinary binary predicate written
infix (``s = t``, negated ``s != t``).  All values are immutable after
parsing and safe to share between concurrent prover runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional


class SymbolKind(str, Enum):
    FUNCTION = "function"
    CONSTANT = "constant"
    PREDICATE = "predicate"
    VARIABLE = "variable"


@dataclass(frozen=True, eq=False)
class Symbol:
    """An interned name with a fixed kind and arity.

    Within one :class:`Signature` interning makes comparison an identity
    check; value equality still holds across signatures.
    """

    name: str
    kind: SymbolKind
    arity: int

    def __post_init__(self):
        object.__setattr__(self, "_h", hash((self.name, self.kind, self.arity)))

    @property
    def is_var(self) -> bool:
        return self.kind is SymbolKind.VARIABLE

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Symbol):
            return NotImplemented
        return (self.name == other.name and self.kind is other.kind
                and self.arity == other.arity)

    def __hash__(self) -> int:
        return self._h

    def __repr__(self) -> str:
        return f"{self.name}/{self.arity}"


class Term:
    """A first-order term; predicate-headed terms appear only as literal atoms.

    ``size`` counts symbol occurrences (the preorder length) and is
    precomputed because every weight function consumes it.
    """

    __slots__ = ("head", "args", "size", "is_var", "has_var", "_hash", "_pre")

    def __init__(self, head: Symbol, args: tuple["Term", ...] = ()):
        if len(args) != head.arity:
            raise ValueError(f"symbol {head.name}/{head.arity} applied to {len(args)} arguments")
        self.head = head
        self.args = args
        self.size = 1 + sum(a.size for a in args)
        # plain attributes, not properties: the prover reads these in hot loops
        self.is_var = head.kind is SymbolKind.VARIABLE
        self.has_var = self.is_var or any(a.has_var for a in args)
        self._hash = hash((head, args))
        self._pre: Optional[tuple[Symbol, ...]] = None

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Term):
            return NotImplemented
        return self._hash == other._hash and self.head == other.head and self.args == other.args

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return render_term(self)

    def preorder(self) -> tuple[Symbol, ...]:
        """The term read as a symbol sequence (depth-first, left to right)."""
        if self._pre is None:
            out: list[Symbol] = []
            stack = [self]
            while stack:
                t = stack.pop()
                out.append(t.head)
                stack.extend(reversed(t.args))
            self._pre = tuple(out)
        return self._pre


def term_size(t: Term) -> int:
    return t.size


def subterm_occurrences(t: Term) -> Iterator[Term]:
    """All subterms of ``t`` including ``t`` itself, with repeats."""
    stack = [t]
    while stack:
        s = stack.pop()
        yield s
        stack.extend(reversed(s.args))


def unique_subterms(t: Term) -> list[Term]:
    """Deduplicated subterms in first-occurrence (preorder) order."""
    return list(dict.fromkeys(subterm_occurrences(t)))


def subterms(t: Term) -> frozenset[Term]:
    """The set of structurally distinct subterms of ``t``, including ``t``."""
    return frozenset(subterm_occurrences(t))


def term_vars(t: Term) -> list[Symbol]:
    """Variable occurrences of ``t`` in preorder (with repeats)."""
    return [s for s in t.preorder() if s.is_var]


@dataclass(frozen=True)
class Literal:
    polarity: bool
    atom: Term

    def __post_init__(self):
        if self.atom.head.kind is not SymbolKind.PREDICATE:
            raise ValueError(f"literal atom must be predicate-headed, got {self.atom.head}")

    def negated(self) -> "Literal":
        return Literal(not self.polarity, self.atom)

    def __repr__(self) -> str:
        return render_literal(self)


class Role(str, Enum):
    AXIOM = "axiom"
    NEGATED_CONJECTURE = "negated_conjecture"
    DERIVED = "derived"


@dataclass(frozen=True, eq=False)
class Clause:
    """A disjunction of literals; an empty literal tuple is the contradiction.

    ``created_at`` is the creation sequence number (equal to ``id`` for
    clauses created by this package) and strictly increases over a prover
    run.  ``goal`` marks conjecture descent: conjecture clauses are goals,
    and derived clauses inherit goal status as computed by the prover.
    """

    id: int
    literals: tuple[Literal, ...]
    role: Role
    created_at: int
    parents: tuple[int, ...] = ()
    goal: bool = False
    rule: str = "input"

    @property
    def is_empty(self) -> bool:
        return not self.literals

    @property
    def is_unit(self) -> bool:
        return len(self.literals) == 1

    @property
    def is_ground(self) -> bool:
        return all(not lit.atom.has_var for lit in self.literals)

    def symbol_count(self) -> int:
        return sum(lit.atom.size for lit in self.literals)

    def __repr__(self) -> str:
        return f"[{self.id}] {render_clause(self)}"


class Signature:
    """Symbol table enforcing one (kind, arity) per name within a problem.

    Interning returns a shared :class:`Symbol` instance per name, so symbol
    comparison in hot paths degenerates to identity checks.
    """

    def __init__(self):
        self._table: dict[str, Symbol] = {}

    def intern(self, name: str, kind: SymbolKind, arity: int,
               loc: Optional[tuple[int, int]] = None) -> Symbol:
        sym = self._table.get(name)
        if sym is None:
            sym = Symbol(name, kind, arity)
            self._table[name] = sym
            return sym
        if sym.kind is not kind or sym.arity != arity:
            where = f"{loc[0]}:{loc[1]}: " if loc else ""
            raise ParseError(
                f"{where}symbol '{name}' used as {kind.value}/{arity} but already "
                f"declared as {sym.kind.value}/{sym.arity}",
                loc,
            )
        return sym

    def get(self, name: str) -> Optional[Symbol]:
        return self._table.get(name)

    def symbols(self) -> list[Symbol]:
        return list(self._table.values())

    def __contains__(self, name: str) -> bool:
        return name in self._table


@dataclass(eq=False)
class Problem:
    name: str
    clauses: list[Clause]
    signature: Signature

    def conjecture_clauses(self) -> list[Clause]:
        return [c for c in self.clauses if c.role is Role.NEGATED_CONJECTURE]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Problem):
            return NotImplemented
        return self.name == other.name and [
            (c.literals, c.role, c.id, c.created_at) for c in self.clauses
        ] == [(c.literals, c.role, c.id, c.created_at) for c in other.clauses]

    def __repr__(self) -> str:
        return f"Problem({self.name!r}, {len(self.clauses)} clauses)"


def conjecture_terms(p: Problem) -> frozenset[Term]:
    """Union of the subterms of every conjecture-clause atom; empty if none."""
    out: set[Term] = set()
    for c in p.conjecture_clauses():
        for lit in c.literals:
            out.update(subterm_occurrences(lit.atom))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Parsing


class ParseError(Exception):
    def __init__(self, message: str, loc: Optional[tuple[int, int]] = None):
        super().__init__(message)
        self.loc = loc


_PUNCT = {"(", ")", ",", ".", "|", "~", "="}

_ROLES = {
    "axiom": Role.AXIOM,
    "hypothesis": Role.AXIOM,
    "negated_conjecture": Role.NEGATED_CONJECTURE,
}


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind: str, text: str, line: int, col: int):
        self.kind = kind   # 'ident', 'var', punctuation itself, '!=', 'eof'
        self.text = text
        self.line = line
        self.col = col

    @property
    def loc(self) -> tuple[int, int]:
        return (self.line, self.col)


def _tokenize(text: str) -> list[_Token]:
    toks: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            i += 1
            col += 1
        elif ch == "%":
            while i < n and text[i] != "\n":
                i += 1
        elif ch == "!" and i + 1 < n and text[i + 1] == "=":
            toks.append(_Token("!=", "!=", line, col))
            i += 2
            col += 2
        elif ch in _PUNCT:
            toks.append(_Token(ch, ch, line, col))
            i += 1
            col += 1
        elif ch.isalpha() or ch == "_":
            start = i
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            word = text[start:i]
            kind = "var" if word[0].isupper() or word[0] == "_" else "ident"
            toks.append(_Token(kind, word, line, col))
            col += i - start
        else:
            raise ParseError(f"{line}:{col}: unexpected character {ch!r}", (line, col))
    toks.append(_Token("eof", "", line, col))
    return toks


class _RawTerm:
    """Parse-tree node before kind resolution: a name with raw arguments."""

    __slots__ = ("name", "args", "is_var", "loc")

    def __init__(self, name: str, args: list["_RawTerm"], is_var: bool, loc: tuple[int, int]):
        self.name = name
        self.args = args
        self.is_var = is_var
        self.loc = loc


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0
        self.sig = Signature()

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def next(self) -> _Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str) -> _Token:
        t = self.next()
        if t.kind != kind:
            raise ParseError(
                f"{t.line}:{t.col}: expected {kind!r}, got {t.text!r}", t.loc
            )
        return t

    def parse_problem(self, name: str) -> Problem:
        clauses: list[Clause] = []
        while self.peek().kind != "eof":
            clauses.append(self.parse_unit(len(clauses)))
        if not clauses:
            raise ParseError("empty input: no cnf units found")
        return Problem(name, clauses, self.sig)

    def parse_unit(self, idx: int) -> Clause:
        head = self.expect("ident")
        if head.text == "include":
            raise ParseError(
                f"{head.line}:{head.col}: include directives are not supported", head.loc
            )
        if head.text != "cnf":
            raise ParseError(
                f"{head.line}:{head.col}: expected 'cnf', got {head.text!r}", head.loc
            )
        self.expect("(")
        name_tok = self.next()
        if name_tok.kind not in ("ident", "var"):
            raise ParseError(
                f"{name_tok.line}:{name_tok.col}: expected a unit name, got {name_tok.text!r}",
                name_tok.loc,
            )
        self.expect(",")
        role_tok = self.expect("ident")
        role = _ROLES.get(role_tok.text)
        if role is None:
            raise ParseError(
                f"{role_tok.line}:{role_tok.col}: unsupported role {role_tok.text!r}",
                role_tok.loc,
            )
        self.expect(",")
        literals = self.parse_clause_body()
        self.expect(")")
        self.expect(".")
        return Clause(
            id=idx,
            literals=tuple(literals),
            role=role,
            created_at=idx,
            goal=role is Role.NEGATED_CONJECTURE,
        )

    def parse_clause_body(self) -> list[Literal]:
        # No literal starts with '(', so a leading one must wrap the whole body.
        if self.peek().kind == "(":
            self.next()
            lits = self.parse_disjunction()
            self.expect(")")
            return lits
        return self.parse_disjunction()

    def parse_disjunction(self) -> list[Literal]:
        lits = [self.parse_literal()]
        while self.peek().kind == "|":
            self.next()
            lits.append(self.parse_literal())
        return lits

    def parse_literal(self) -> Literal:
        polarity = True
        if self.peek().kind == "~":
            self.next()
            polarity = False
        left = self.parse_raw_term()
        nxt = self.peek()
        if nxt.kind in ("=", "!="):
            if not polarity:
                raise ParseError(
                    f"{nxt.line}:{nxt.col}: negate equality with '!=' instead of '~'",
                    nxt.loc,
                )
            self.next()
            right = self.parse_raw_term()
            eq = self.sig.intern("=", SymbolKind.PREDICATE, 2, nxt.loc)
            atom = Term(eq, (self.resolve(left, False), self.resolve(right, False)))
            return Literal(nxt.kind == "=", atom)
        if left.is_var:
            raise ParseError(
                f"{left.loc[0]}:{left.loc[1]}: variable {left.name!r} cannot head a literal",
                left.loc,
            )
        return Literal(polarity, self.resolve(left, True))

    def parse_raw_term(self) -> _RawTerm:
        tok = self.next()
        if tok.kind == "var":
            return _RawTerm(tok.text, [], True, tok.loc)
        if tok.kind != "ident":
            raise ParseError(f"{tok.line}:{tok.col}: expected a term, got {tok.text!r}", tok.loc)
        args: list[_RawTerm] = []
        if self.peek().kind == "(":
            self.next()
            args.append(self.parse_raw_term())
            while self.peek().kind == ",":
                self.next()
                args.append(self.parse_raw_term())
            self.expect(")")
        return _RawTerm(tok.text, args, False, tok.loc)

    def resolve(self, raw: _RawTerm, as_predicate: bool) -> Term:
        if raw.is_var:
            return Term(self.sig.intern(raw.name, SymbolKind.VARIABLE, 0, raw.loc))
        if as_predicate:
            kind = SymbolKind.PREDICATE
        elif raw.args:
            kind = SymbolKind.FUNCTION
        else:
            kind = SymbolKind.CONSTANT
        sym = self.sig.intern(raw.name, kind, len(raw.args), raw.loc)
        return Term(sym, tuple(self.resolve(a, False) for a in raw.args))


def parse_problem(text: str, name: str = "problem") -> Problem:
    """Parse a CNF problem; raises :class:`ParseError` with line/column info."""
    return _Parser(text).parse_problem(name)


# ---------------------------------------------------------------------------
# Rendering (canonical; parse(render(parse(x))) == parse(x))


def render_term(t: Term) -> str:
    if not t.args:
        return t.head.name
    return f"{t.head.name}({','.join(render_term(a) for a in t.args)})"


def render_literal(lit: Literal) -> str:
    if lit.atom.head.name == "=":
        op = "=" if lit.polarity else "!="
        lhs, rhs = lit.atom.args
        return f"{render_term(lhs)}{op}{render_term(rhs)}"
    body = render_term(lit.atom)
    return body if lit.polarity else f"~{body}"


def render_clause(c: Clause) -> str:
    if c.is_empty:
        return "$false"
    return "|".join(render_literal(lit) for lit in c.literals)


def render_problem(p: Problem) -> str:
    lines = []
    for c in p.clauses:
        role = "negated_conjecture" if c.role is Role.NEGATED_CONJECTURE else "axiom"
        lines.append(f"cnf(c{c.id},{role},{render_clause(c)}).")
    return "\n".join(lines) + "\n"
