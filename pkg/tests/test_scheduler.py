"""Schedule construction (greedy cover, SOTAC, E-SOTAC), execution with
an equal time split, and the schedule file format."""

import itertools
import random
from fractions import Fraction

import pytest

from strathive.ils import PENALTY
from strathive.logic import parse_problem
from strathive.protocol import parse_protocol, protocol_digest, render_protocol
from strathive.prover import ProofStatus, loops_for_seconds
from strathive.scheduler import (
    ScheduleError,
    ScheduleMethod,
    Scheduler,
    build_schedule,
    esotac_scores,
    greedy_cover,
    parse_schedule,
    render_schedule,
    run_schedule,
    sotac_scores,
)
from strathive.tuner import PerfMatrix

P = PENALTY


def proto(i=1, text=None):
    return parse_protocol(text or f"-tNONE -Wnone -H'({i}*FIFOWeight(PreferAll))'")


def matrix_of(rows, t_eval=Fraction(5)):
    problems = tuple(f"prob{j}" for j in range(len(rows[0])))
    protocols = tuple(proto(i + 1) for i in range(len(rows)))
    costs = tuple(tuple(Fraction(c) for c in row) for row in rows)
    return PerfMatrix(protocols, problems, costs, t_eval)


# ---------------------------------------------------------------------------
# Greedy covering


def test_greedy_single_protocol_covers_all():
    m = matrix_of([[1, 2, 3], [1, P, P]])
    assert greedy_cover(m) == [m.protocols[0]]


def test_greedy_cover_example():
    # P1 solves {a,b}, P2 {b,c}, P3 {c}: P3 adds nothing after P1, P2
    m = matrix_of([[1, 1, P], [P, 1, 1], [P, P, 1]])
    assert greedy_cover(m) == [m.protocols[0], m.protocols[1]]


def test_greedy_nothing_solved():
    m = matrix_of([[P, P], [P, P]])
    assert greedy_cover(m) == []
    with pytest.raises(ScheduleError):
        build_schedule(ScheduleMethod("greedy", Fraction(1)), m, 1000)


def test_greedy_tie_prefers_lower_index():
    m = matrix_of([[1, 1, P], [P, 1, 1]])
    assert greedy_cover(m)[0] == m.protocols[0]


def test_greedy_threshold_restricts_solved():
    m = matrix_of([[100, 900], [200, 200]])
    # unrestricted: row 0 and row 1 both solve everything, tie to row 0
    assert greedy_cover(m) == [m.protocols[0]]
    # at 500 loops row 0 only solves prob0, so row 1 covers alone
    assert greedy_cover(m, threshold=500) == [m.protocols[1]]


def test_greedy_step_is_max_marginal_gain():
    rng = random.Random(11)
    for _ in range(100):
        n_p, n_j = rng.randint(1, 5), rng.randint(1, 7)
        rows = [[rng.choice([1, P]) for _ in range(n_j)] for _ in range(n_p)]
        m = matrix_of(rows)
        picked = greedy_cover(m)
        solved = [frozenset(j for j in range(n_j) if rows[i][j] < P)
                  for i in range(n_p)]
        covered = set()
        for p in picked:
            i = m.protocols.index(p)
            gain = len(solved[i] - covered)
            assert gain > 0
            for k in range(n_p):  # no earlier row had a larger gain
                better = len(solved[k] - covered)
                assert better < gain or (better == gain and k >= i) or \
                    m.protocols[k] in picked[: picked.index(p)]
            covered |= solved[i]
        # exactly the union-solvable set is covered
        assert covered == set().union(*solved) if solved else covered == set()


# ---------------------------------------------------------------------------
# SOTAC / E-SOTAC


def test_sotac_hand_values():
    # both protocols solve both problems: each problem scores 1/2
    m = matrix_of([[1, 1], [1, 1]])
    s = sotac_scores(m)
    assert s[m.protocols[0]] == Fraction(1, 2)
    e = esotac_scores(m)
    assert e[m.protocols[0]] == Fraction(1)


def test_sotac_unique_solver_scores_one():
    m = matrix_of([[1, P], [P, P]])
    s = sotac_scores(m)
    assert s[m.protocols[0]] == 1
    assert s[m.protocols[1]] == 0
    e = esotac_scores(m)
    assert e[m.protocols[0]] == 1 and e[m.protocols[1]] == 0


def test_esotac_rewards_breadth():
    # row 0 solves three shared problems, row 1 one unique problem
    m = matrix_of([[1, 1, 1, P], [1, 1, 1, 1]])
    s, e = sotac_scores(m), esotac_scores(m)
    assert s[m.protocols[1]] > s[m.protocols[0]]  # rarity favors row 1
    assert e[m.protocols[0]] == Fraction(3, 2)
    assert e[m.protocols[1]] == Fraction(3, 2) + 1


def test_esotac_solo_protocol_counts_problems():
    m = matrix_of([[1, 1, 1, P]])
    assert esotac_scores(m)[m.protocols[0]] == 3


def test_scores_invariant_under_row_permutation():
    rng = random.Random(3)
    rows = [[rng.choice([1, 7, P]) for _ in range(6)] for _ in range(4)]
    m = matrix_of(rows)
    base_s, base_e = sotac_scores(m), esotac_scores(m)
    for perm in itertools.permutations(range(4)):
        pm = PerfMatrix(tuple(m.protocols[i] for i in perm), m.problems,
                        tuple(m.costs[i] for i in perm), m.t_eval)
        ps, pe = sotac_scores(pm), esotac_scores(pm)
        for i in perm:
            assert ps[m.protocols[i]] == base_s[m.protocols[i]]
            assert pe[m.protocols[i]] == base_e[m.protocols[i]]


# ---------------------------------------------------------------------------
# build_schedule


def test_build_sotac_top_n():
    m = matrix_of([[1, P, P], [1, 1, P], [P, P, P]])
    s = build_schedule(ScheduleMethod("sotac", 2), m, 1000)
    # row 1 solves a unique problem: sotac 3/4 vs row 0's 1/2
    assert s.protocols == (m.protocols[1], m.protocols[0])
    assert s.slot_seconds == m.t_eval
    one = build_schedule(ScheduleMethod("sotac", 1), m, 1000)
    assert one.protocols == (m.protocols[1],)


def test_build_excludes_zero_scores():
    m = matrix_of([[1, 1], [P, P]])
    s = build_schedule(ScheduleMethod("esotac", 5), m, 1000)
    assert s.protocols == (m.protocols[0],)
    with pytest.raises(ScheduleError):
        build_schedule(ScheduleMethod("sotac", 3), matrix_of([[P], [P]]), 1000)


def test_build_greedy_uses_loop_threshold():
    m = matrix_of([[100, 900], [200, 200]])
    rate = 100  # threshold = loops_for_seconds(5, 100) = 500
    s = build_schedule(ScheduleMethod("greedy", Fraction(5)), m, rate)
    assert s.protocols == (m.protocols[1],)
    assert s.slot_seconds == Fraction(5)


def test_lower_greedy_time_selects_more_protocols():
    # at the loose limit one row covers everything; at the tight limit
    # each problem needs its specialist
    m = matrix_of([[100, 5000, 5000], [4000, 100, P], [P, P, 100]])
    rate = 1000
    loose = build_schedule(ScheduleMethod("greedy", Fraction(10)), m, rate)
    tight = build_schedule(ScheduleMethod("greedy", Fraction(1, 2)), m, rate)
    assert len(tight.protocols) > len(loose.protocols)
    assert len(loose.protocols) == 1 and len(tight.protocols) == 3


def test_method_validation():
    with pytest.raises(ScheduleError):
        ScheduleMethod("greedy", 3)  # needs a Fraction
    with pytest.raises(ScheduleError):
        ScheduleMethod("sotac", 0)
    with pytest.raises(ScheduleError):
        ScheduleMethod("fancy", 1)
    assert ScheduleMethod.parse("esotac(7)").value == 7
    assert ScheduleMethod.parse("greedy(1/2)").value == Fraction(1, 2)
    with pytest.raises(ScheduleError):
        ScheduleMethod.parse("greedy")


def test_scheduler_invariants():
    with pytest.raises(ScheduleError):
        Scheduler((), ScheduleMethod("sotac", 1), Fraction(5))
    with pytest.raises(ScheduleError):
        Scheduler((proto(1), proto(1)), ScheduleMethod("sotac", 1), Fraction(5))
    with pytest.raises(ScheduleError):
        Scheduler((proto(1),), ScheduleMethod("sotac", 1), Fraction(0))


# ---------------------------------------------------------------------------
# run_schedule


PATH = """
cnf(e1,axiom,edge(a,b)).
cnf(e2,axiom,edge(b,c)).
cnf(e3,axiom,edge(c,d)).
cnf(base,axiom,~edge(X,Y)|path(X,Y)).
cnf(trans,axiom,~path(X,Y)|~path(Y,Z)|path(X,Z)).
cnf(goal,negated_conjecture,~path(a,d)).
"""

FIFO = "-tNONE -Wnone -H'(1*FIFOWeight(PreferAll))'"
SELFIRST = "-tNONE -WSelectFirstNeg -H'(1*FIFOWeight(PreferAll))'"


def test_run_schedule_single_slot_proves():
    s = Scheduler((proto(text=SELFIRST),), ScheduleMethod("sotac", 1), Fraction(1))
    r = run_schedule(s, parse_problem(PATH), Fraction(1), loop_rate=1000)
    assert r.status is ProofStatus.PROVED
    assert r.proof[-1].is_empty


def test_run_schedule_second_slot_saves_the_day():
    # slot 1 saturates a satisfiable problem fragment; slot 2 proves it.
    # 40 loops of FIFO cannot prove the path problem, selection can.
    s = Scheduler((proto(text=FIFO), proto(text=SELFIRST)),
                  ScheduleMethod("sotac", 2), Fraction(1))
    r = run_schedule(s, parse_problem(PATH), Fraction(2), loop_rate=40)
    assert r.status is ProofStatus.PROVED


def test_run_schedule_exhaustion_sums_counters():
    unsolvable = parse_problem(PATH)
    s = Scheduler((proto(1), proto(2)), ScheduleMethod("sotac", 2), Fraction(1))
    r = run_schedule(s, unsolvable, Fraction(2), loop_rate=10)
    assert r.status is ProofStatus.RESOURCE_OUT
    assert r.proof is None
    # each slot got loops_for_seconds(1, 10) = 10 loops
    assert r.gc_loops == 20
    assert r.derived_count > 0
    with pytest.raises(ScheduleError):
        run_schedule(s, unsolvable, Fraction(0), loop_rate=10)


def test_run_schedule_budget_split():
    # total budget in loops never exceeds the calibration total plus
    # one rounding unit per slot
    total, rate, k = Fraction(7, 3), 997, 3
    per_slot = loops_for_seconds(total / k, rate)
    assert k * per_slot <= loops_for_seconds(total, rate) + k


def test_first_proof_short_circuits():
    # a deliberately broken second slot would raise if ever run
    class Boom:
        pass

    s = Scheduler((proto(text=SELFIRST), proto(text=FIFO)),
                  ScheduleMethod("sotac", 2), Fraction(1))
    r = run_schedule(s, parse_problem(PATH), Fraction(2), loop_rate=1000)
    assert r.status is ProofStatus.PROVED
    # proved in slot 1: loop count well under a two-slot sum
    assert r.gc_loops < 100


# ---------------------------------------------------------------------------
# Schedule files


def test_schedule_file_round_trip():
    s = Scheduler((proto(1), proto(2), proto(text=SELFIRST)),
                  ScheduleMethod("greedy", Fraction(5, 2)), Fraction(5, 2))
    text = render_schedule(s)
    assert text.startswith("# schedule method=greedy(2.5) slot_seconds=2.5\n")
    back = parse_schedule(text)
    assert back == s
    # protocol lines are canonical
    for line, p in zip(text.splitlines()[1:], s.protocols):
        assert line == render_protocol(p)


def test_schedule_file_drops_exact_duplicates():
    s = Scheduler((proto(1), proto(2)), ScheduleMethod("sotac", 2), Fraction(5))
    lines = render_schedule(s).splitlines()
    doctored = "\n".join([lines[0], lines[1], lines[1], lines[2]]) + "\n"
    back = parse_schedule(doctored)
    assert back.protocols == s.protocols


def test_schedule_file_errors():
    with pytest.raises(ScheduleError):
        parse_schedule("no header\n")
    with pytest.raises(ScheduleError):
        parse_schedule("# schedule method=sotac(2) slot_seconds=5\n")  # empty
    with pytest.raises(ScheduleError):
        parse_schedule("# schedule slot_seconds=5\n" + render_protocol(proto(1)))
