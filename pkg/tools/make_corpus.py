"""Generate the bundled training corpus.

Each problem buries a goal-relevant derivation inside distractor
material, sized so that a generic clause-weight protocol lands in
different cost regimes: comfortably solvable, solvable only inside the
eligibility band, or out of reach until a conjecture-guided protocol is
found.  Clause order is shuffled per problem with a fixed seed so FIFO
components see no helpful layout.

Run from the repository root:  python3 tools/make_corpus.py
"""

import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src/strathive/data/corpus"


def relay(name, length, chains, links=4, break_at=None, seed=0):
    """An implication relay reach(n0) -> ... -> reach(nL) under noise.

    Noise chain j is an isolated relay over predicate wj; it contributes
    work but never touches the goal.  ``break_at`` removes one link so
    the goal becomes underivable (a satisfiable instance).
    """
    rng = random.Random(seed)
    axioms = ["reach(n0)"]
    for i in range(1, length + 1):
        if i == break_at:
            continue
        axioms.append(f"~reach(n{i - 1})|reach(n{i})")
    for j in range(chains):
        axioms.append(f"w{j}(m0)")
        for i in range(1, links + 1):
            axioms.append(f"~w{j}(m{i - 1})|w{j}(m{i})")
    rng.shuffle(axioms)
    lines = [f"cnf(a{k},axiom,{ax})." for k, ax in enumerate(axioms)]
    lines.append(f"cnf(goal,negated_conjecture,~reach(n{length})).")
    return name, "\n".join(lines) + "\n"


def count(name, depth, chains, links=4, seed=0):
    """Successor counting: num(z), num(X) -> num(s(X)), goal at s^depth(z).

    Derived facts grow with depth, so symbol-counting weights push them
    ever further back while distance-to-conjecture weights pull them in.
    """
    rng = random.Random(seed)
    axioms = ["num(z)", "~num(X)|num(s(X))"]
    for j in range(chains):
        axioms.append(f"w{j}(m0)")
        for i in range(1, links + 1):
            axioms.append(f"~w{j}(m{i - 1})|w{j}(m{i})")
    rng.shuffle(axioms)
    goal = "z"
    for _ in range(depth):
        goal = f"s({goal})"
    lines = [f"cnf(a{k},axiom,{ax})." for k, ax in enumerate(axioms)]
    lines.append(f"cnf(goal,negated_conjecture,~num({goal})).")
    return name, "\n".join(lines) + "\n"


def mirage(name, length, chains, links=12, seed=0):
    """A relay whose distractors flaunt the conjecture's constant.

    The real derivation walks walk(b0)..walk(bL) over symbols foreign to
    the goal; every decoy atom is a wide tuple of the goal constant c.
    Conjecture-symbol discounts make the decoys look cheapest and chase
    all of them before the first real link, while a plain symbol count
    sees big decoy atoms and proves the goal without touching them.  No
    single weighting style wins both this family and the noise relays.
    """
    rng = random.Random(seed)
    wide = "(" + ",".join("c" for _ in range(4)) + ")"
    axioms = ["walk(b0)"]
    for i in range(1, length + 1):
        axioms.append(f"~walk(b{i - 1})|walk(b{i})")
    axioms.append(f"~walk(b{length})|goal(c)")
    for j in range(chains):
        axioms.append(f"m{j}_0{wide}")
        for i in range(1, links + 1):
            axioms.append(f"~m{j}_{i - 1}{wide}|m{j}_{i}{wide}")
    rng.shuffle(axioms)
    lines = [f"cnf(a{k},axiom,{ax})." for k, ax in enumerate(axioms)]
    lines.append("cnf(goal,negated_conjecture,~goal(c)).")
    return name, "\n".join(lines) + "\n"


def pigeons(name, holes):
    """holes+1 pigeons into ``holes`` holes, propositionally.

    No conjecture clause: the contradiction lives among the axioms, which
    also exercises the conjecture-free fallbacks of distance weights.
    """
    n = holes + 1
    lines = []
    for p in range(1, n + 1):
        disj = "|".join(f"in{p}{h}" for h in range(1, holes + 1))
        lines.append(f"cnf(p{p},axiom,{disj}).")
    k = 0
    for h in range(1, holes + 1):
        for p1 in range(1, n + 1):
            for p2 in range(p1 + 1, n + 1):
                k += 1
                lines.append(f"cnf(h{k},axiom,~in{p1}{h}|~in{p2}{h}).")
    return name, "\n".join(lines) + "\n"


def build():
    problems = []

    # warm-ups: solvable fast by nearly anything
    for k, (length, chains) in enumerate(
            [(6, 0), (10, 2), (14, 5), (8, 8), (16, 10), (12, 14)]):
        problems.append(relay(f"relay_easy{k}", length, chains, seed=100 + k))

    # the eligibility band for a generic symbol-counting protocol
    for k, (length, chains) in enumerate(
            [(12, 60), (14, 70), (16, 80), (12, 95), (18, 105), (14, 120),
             (16, 135), (20, 150), (18, 165), (15, 180), (17, 200), (19, 220)]):
        problems.append(relay(f"relay_band{k}", length, chains, seed=200 + k))

    # out of generic reach; a goal-guided protocol walks straight through
    for k, (length, chains) in enumerate(
            [(15, 290), (18, 310), (16, 330), (20, 355), (17, 380),
             (19, 405), (16, 430), (21, 455), (18, 480), (22, 505)]):
        problems.append(relay(f"relay_hard{k}", length, chains, seed=300 + k))

    # counting flavor of the same regimes
    for k, (depth, chains) in enumerate(
            [(8, 55), (10, 70), (12, 90), (9, 110), (11, 130)]):
        problems.append(count(f"count_band{k}", depth, chains, seed=400 + k))
    for k, (depth, chains) in enumerate(
            [(10, 290), (12, 330), (14, 370)]):
        problems.append(count(f"count_hard{k}", depth, chains, seed=500 + k))

    # symbol-affinity heuristics chase the decoys here; symbol counting
    # is immune, so these anchor protocol complementarity
    for k, (length, chains) in enumerate([(8, 130), (10, 120), (9, 145)]):
        problems.append(mirage(f"mirage{k}", length, chains, seed=700 + k))

    # combinatorial texture
    problems.append(pigeons("pigeon3", 2))
    problems.append(pigeons("pigeon4", 3))

    # satisfiable: the relay is broken, the goal is underivable
    for k, (length, chains) in enumerate([(12, 30), (16, 45), (14, 60)]):
        problems.append(relay(f"open_relay{k}", length, chains,
                              break_at=length // 2, seed=600 + k))

    # beyond every protocol at the bundled evaluation limits
    problems.append(relay("deep0", 1400, 0))

    return problems


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    problems = build()
    names = [n for n, _ in problems]
    assert len(set(names)) == len(names)
    for name, text in problems:
        (OUT / f"{name}.p").write_text(text)
    print(f"wrote {len(problems)} problems to {OUT}")


if __name__ == "__main__":
    main()
