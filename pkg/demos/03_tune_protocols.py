"""Tune a proof-search protocol against a problem corpus.

Starting from a generic seed protocol, the tuner alternates two local
searches: a coarse phase swaps whole CEFs in and out of the heuristic
from a shared collection, and a fine phase adjusts the priorities and
numeric arguments inside the winner.  Every evaluated protocol row lands
in an on-disk performance matrix, and the CEFs of each phase winner earn
usage credit in a persistent database, so later runs start from what
worked before.

Takes a couple of minutes.  Run as:  python3 demos/03_tune_protocols.py
"""

import tempfile
from fractions import Fraction
from importlib import resources
from pathlib import Path

from strathive.logic import parse_problem
from strathive.protocol import parse_protocol, render_protocol
from strathive.tuner import Tuner, TunerConfig

F = Fraction

# conjecture-blind seed: symbol counting plus a FIFO tie squad
SEED = ("-tNONE -WSelectLargestNeg "
        "-H'(5*Clauseweight(PreferAll,2,1,1),1*FIFOWeight(PreferAll))'")

# a slice of the bundled corpus: easy warmups, mid-band problems the
# seed solves slowly, and noise-heavy ones it cannot crack at the limit
NAMES = [
    "relay_easy0.p", "relay_easy1.p",
    "relay_band0.p", "relay_band1.p", "relay_band2.p", "relay_band3.p",
    "relay_hard0.p", "relay_hard1.p", "relay_hard2.p",
    "open_relay0.p",
]


def main():
    data = resources.files("strathive.data")
    corpus = {n: parse_problem(data.joinpath(f"corpus/{n}").read_text(), name=n)
              for n in NAMES}

    config = TunerConfig(T_improve=F(5), t_cutoff=F(1), t_eval=F(5), c_cef=4)
    state = Path(tempfile.mkdtemp(prefix="strathive-demo-")) / "state"
    tuner = Tuner(corpus, config, state, rng_seed=7, loop_rate=500)

    tuner.bootstrap([parse_protocol(SEED)])
    print(f"seed protocol solves {tuner.matrix.total_solved()}/{len(corpus)} "
          f"problems at the evaluation limit")

    for k in range(3):
        if not tuner.iteration():
            print(f"iteration {k + 1}: every eligible protocol/problem pair "
                  f"has been tried, stopping early")
            break
        print(f"after iteration {k + 1}: "
              f"{tuner.matrix.total_solved()}/{len(corpus)} solved, "
              f"{len(tuner.matrix.protocols)} protocols in the matrix")

    best = max(range(len(tuner.matrix.protocols)),
               key=lambda i: len(tuner.matrix.solved_set(i)))
    print(f"\nbest protocol found:\n  "
          f"{render_protocol(tuner.matrix.protocols[best])}")
    solved = sorted(tuner.matrix.problems[j]
                    for j in tuner.matrix.solved_set(best))
    print(f"solves {len(solved)}: {', '.join(solved)}")
    print(f"\nstate written under {state} (matrix.csv, protocols/, "
          f"cefdb.json, iterations.log)")


if __name__ == "__main__":
    main()
