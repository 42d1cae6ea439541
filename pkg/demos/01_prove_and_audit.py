"""Prove a bundled problem, print the refutation, and re-check it.

The prover runs a given-clause saturation loop: it repeatedly picks an
unprocessed clause (the "given" clause, chosen by the protocol's clause
evaluation functions), resolves it against everything processed so far,
and stops when it derives the empty clause.  The audit pass then replays
every derivation step with nothing but a fresh unifier, so a bug in the
prover's indexing or simplification cannot silently fake a proof.

Run as:  python3 demos/01_prove_and_audit.py
"""

from importlib import resources

from strathive.audit import audit_proof
from strathive.logic import parse_problem, render_clause
from strathive.protocol import parse_protocol
from strathive.prover import Limits, saturate

# KBO ordering, first negative literal selected, and a clause evaluation
# scheme that prefers clauses structurally close to the conjecture
PROTOCOL = ("-tKBO -WSelectFirstNeg "
            "-H'(3*Struc(PreferGoals,2,1,1),1*FIFOWeight(PreferAll))'")

NAME = "relay_band0.p"


def main():
    text = resources.files("strathive.data").joinpath(f"corpus/{NAME}").read_text()
    problem = parse_problem(text, name=NAME)
    goals = problem.conjecture_clauses()
    print(f"problem {NAME}: {len(problem.clauses)} input clauses, "
          f"{len(goals)} conjecture clause(s)")
    for c in goals:
        print(f"  goal: {render_clause(c)}")

    proto = parse_protocol(PROTOCOL)
    result = saturate(problem, proto, Limits.for_loops(5000))
    print(f"\nstatus: {result.status.value}")
    print(f"given-clause loops: {result.gc_loops}, "
          f"clauses derived: {result.derived_count}, "
          f"wall: {result.wall_time:.3f}s")

    if result.proof is None:
        print("no proof found at this limit")
        return

    print(f"\nrefutation ({len(result.proof)} clauses):")
    for c in result.proof:
        src = f"{c.rule}({', '.join(str(p) for p in c.parents)})" \
            if c.parents else c.rule
        print(f"  [{c.id:4d}] {render_clause(c):<40}  {src}")

    steps = audit_proof(problem, result.proof)
    print(f"\naudit: {steps} derivation steps re-unified independently, "
          f"all sound")


if __name__ == "__main__":
    main()
