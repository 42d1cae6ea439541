"""Term builders shared across test modules."""

from strathive.logic import Clause, Literal, Role, Symbol, SymbolKind, Term


def fn(name, *args):
    return Term(Symbol(name, SymbolKind.FUNCTION, len(args)), tuple(args))


def const(name):
    return Term(Symbol(name, SymbolKind.CONSTANT, 0))


def var(name):
    return Term(Symbol(name, SymbolKind.VARIABLE, 0))


def pred(name, *args):
    return Term(Symbol(name, SymbolKind.PREDICATE, len(args)), tuple(args))


def lit(atom, positive=True):
    return Literal(positive, atom)


def clause(cid, literals, role=Role.AXIOM, goal=False, parents=()):
    return Clause(id=cid, literals=tuple(literals), role=role,
                  created_at=cid, parents=tuple(parents),
                  goal=goal or role is Role.NEGATED_CONJECTURE)
