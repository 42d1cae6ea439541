"""Combine complementary protocols into an execution schedule.

No single protocol wins everywhere, so a portfolio beats a champion: a
schedule is an ordered protocol list run back to back, each slot getting
an equal share of the time budget.  Greedy covering picks protocols by
maximum marginal gain over a performance matrix; the SOTAC scores rank
them by how irreplaceable they are (a problem only you solve is worth a
full point, a problem everyone solves is worth a sliver).

Run as:  python3 demos/04_schedules.py
"""

from fractions import Fraction
from importlib import resources

from strathive.logic import parse_problem
from strathive.protocol import parse_protocol
from strathive.scheduler import (
    ScheduleMethod,
    build_schedule,
    esotac_scores,
    greedy_cover,
    render_schedule,
    run_schedule,
    sotac_scores,
)
from strathive.tuner import PerfMatrix, ProtocolRunner

F = Fraction
LOOP_RATE = 500  # loops per second; pins time limits to loop counts

PROTOCOLS = {
    "symbol-count": "-tNONE -WSelectLargestNeg "
                    "-H'(5*Clauseweight(PreferAll,2,1,1),1*FIFOWeight(PreferAll))'",
    "goal-symbols": "-tKBO -WSelectFirstNeg "
                    "-H'(3*ConjectureSymbolWeight(PreferGoals,0.1,2,2,2,1),"
                    "1*FIFOWeight(PreferAll))'",
    "breadth-first": "-tNONE -Wnone -H'(1*FIFOWeight(PreferAll))'",
}

# noise relays sink the symbol counter; mirage decoys sink the
# goal-symbol chaser; neither protocol dominates the other
NAMES = [
    "relay_easy0.p", "relay_easy2.p", "relay_band0.p", "relay_band1.p",
    "relay_hard0.p", "relay_hard1.p", "count_band0.p", "mirage0.p",
    "mirage1.p", "pigeon3.p",
]


def main():
    data = resources.files("strathive.data")
    corpus = {n: parse_problem(data.joinpath(f"corpus/{n}").read_text(), name=n)
              for n in NAMES}
    runner = ProtocolRunner(corpus)

    t_eval = F(5)
    matrix = PerfMatrix.empty(sorted(corpus), t_eval)
    eval_loops = int(t_eval * LOOP_RATE)
    for label, text in PROTOCOLS.items():
        proto = parse_protocol(text)
        row = runner.costs(proto, matrix.problems, eval_loops, 30.0)
        matrix = matrix.with_row(proto, row)
        solved = sorted(matrix.problems[j]
                        for j in matrix.solved_set(len(matrix.protocols) - 1))
        print(f"{label:>13}: solves {len(solved):2d}  ({', '.join(solved)})")

    print(f"\nany single protocol tops out below the union of "
          f"{matrix.total_solved()} solvable problems")

    cover = greedy_cover(matrix)
    labels = {parse_protocol(t).cefs: l for l, t in PROTOCOLS.items()}
    print("\ngreedy cover order:",
          " -> ".join(labels[p.cefs] for p in cover))
    sot, eso = sotac_scores(matrix), esotac_scores(matrix)
    for i, p in enumerate(matrix.protocols):
        print(f"  {labels[p.cefs]:>13}: sotac={float(sot[p]):.3f} "
              f"e-sotac={float(eso[p]):.3f}")

    schedule = build_schedule(ScheduleMethod("greedy", F(5)), matrix, LOOP_RATE)
    print(f"\nschedule file ({len(schedule.protocols)} slots, "
          f"{schedule.slot_seconds}s each):")
    for line in render_schedule(schedule).splitlines():
        print(f"  {line}")

    target = "relay_hard0.p"
    result = run_schedule(schedule, corpus[target], total_seconds=F(10),
                          loop_rate=LOOP_RATE)
    print(f"\nrunning the schedule on {target} (the first slot gives up, "
          f"the second proves it):")
    print(f"  {result.status.value} after {result.gc_loops} given-clause loops")


if __name__ == "__main__":
    main()
