"""How clause evaluation functions order the search queue.

A protocol's heuristic is a frequency-weighted list of CEFs, each a
(priority function, weight function) pair; the prover always picks the
clause minimizing (priority, weight).  Conjecture-aware weight functions
measure how far a clause sits from the goal (shared symbols, edit
distance on the term trees, tf-idf rarity), which is what lets a tuned
protocol ignore noise axioms that a plain symbol count would chase.

Run as:  python3 demos/02_clause_evaluation.py
"""

from fractions import Fraction

from strathive.logic import parse_problem, render_clause, render_term
from strathive.weights import (
    EditArgs,
    EvalContext,
    lev_distance,
    parse_cef,
    evaluate_cef,
    ted_distance,
)

F = Fraction

PROBLEM = """
cnf(goal, negated_conjecture, ~path(a, d)).
cnf(ax1, axiom, path(a, b)).
cnf(ax2, axiom, ~path(a, X) | ~path(X, d) | path(a, d)).
cnf(ax3, axiom, path(b, d)).
cnf(noise1, axiom, weather(rainy) | weather(sunny)).
cnf(noise2, axiom, ~weather(rainy) | umbrella(yes)).
cnf(noise3, axiom, price(gadget, high)).
"""

CEFS = [
    ("Clauseweight", "Clauseweight(PreferAll,2,1,1)"),
    ("ConjSymbol", "ConjectureSymbolWeight(PreferAll,0.1,2,2,2,1)"),
    ("Ted", "Ted(PreferAll,1,1,1)"),
    ("Tfidf", "Tfidf(PreferAll,ax)"),
]


def main():
    problem = parse_problem(PROBLEM, name="demo")
    ctx = EvalContext(problem)
    clauses = [c for c in problem.clauses if c.role.value != "negated_conjecture"]

    print("conjecture: ~path(a, d)\n")
    print(f"{'clause':<34}" + "".join(f"{label:>14}" for label, _ in CEFS))
    for c in clauses:
        weights = []
        for _label, text in CEFS:
            _prio, w = evaluate_cef(parse_cef(text), c, ctx)
            weights.append(float(w))
        print(f"{render_clause(c):<34}" + "".join(f"{w:>14.2f}" for w in weights))

    print("\nconjecture-blind Clauseweight scores the noise axioms the same")
    print("as the path axioms; the conjecture-aware columns push every")
    print("weather/price clause to the back of the queue.\n")

    unit = EditArgs(F(1), F(1), F(1))
    pairs = [("path(a, b)", "path(a, d)"), ("weather(rainy)", "path(a, d)")]
    for left, right in pairs:
        p = parse_problem(f"cnf(l, axiom, {left}).\ncnf(r, axiom, {right}).",
                          name="pair")
        t1 = p.clauses[0].literals[0].atom
        t2 = p.clauses[1].literals[0].atom
        print(f"ted({render_term(t1)}, {render_term(t2)}) = "
              f"{ted_distance(t1, t2, unit)}   "
              f"lev(symbol strings) = "
              f"{lev_distance(render_term(t1), render_term(t2), unit)}")


if __name__ == "__main__":
    main()
