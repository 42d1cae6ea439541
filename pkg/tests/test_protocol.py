import json
import random
from fractions import Fraction as F

import pytest

from generators import random_cef, random_collection, random_protocol
from strathive.protocol import (
    OFF,
    Config,
    LiteralSelection,
    Ordering,
    ParamDef,
    Protocol,
    ProtocolError,
    encode_global,
    fine_space,
    global_space,
    lift_to_fine,
    load_value_sets,
    parse_protocol,
    project_to_global,
    protocol_digest,
    render_protocol,
)
from strathive.weights import CEF, CefError, DocSource, PriorityFn, make_weight_fn


MINIMAL = "-tKBO -Wnone -H'(1*FIFOWeight(PreferAll))'"
EXAMPLE_SHAPED = ("-tKBO -WSelectLargestNeg "
                  "-H'(13*Refinedweight(PreferGoals,1,2,2,3,2), "
                  "2*Clauseweight(ByCreationDate,-2,-1,0.5))'")


# ---------------------------------------------------------------------------
# Wire syntax

def test_parse_minimal():
    p = parse_protocol(MINIMAL)
    assert p.ordering is Ordering.KBO
    assert p.literal_selection is LiteralSelection.NONE
    assert len(p.cefs) == 1
    freq, cef = p.cefs[0]
    assert freq == 1
    assert cef.weight.name == "FIFOWeight"
    assert cef.priority is PriorityFn.PREFER_ALL


def test_parse_two_cef_protocol():
    p = parse_protocol(EXAMPLE_SHAPED)
    assert [freq for freq, _ in p.cefs] == [13, 2]
    assert p.cefs[0][1].weight.name == "Refinedweight"
    assert p.cefs[1][1].weight.args.c_f == -2
    assert p.cefs[1][1].weight.args.pos_mult == F(1, 2)


def test_render_is_canonical_fixed_point():
    p = parse_protocol(EXAMPLE_SHAPED)
    text = render_protocol(p)
    assert " -H'(13*Refinedweight(PreferGoals,1,2,2,3,2),2*Clauseweight(ByCreationDate,-2,-1,0.5))'" in text
    assert parse_protocol(text) == p
    assert render_protocol(parse_protocol(text)) == text


@pytest.mark.parametrize("bad", [
    "",
    "-tKBO -Wnone",
    "-tFPO -Wnone -H'(1*FIFOWeight(PreferAll))'",
    "-tKBO -WSelectNothing -H'(1*FIFOWeight(PreferAll))'",
    "-tKBO -Wnone -H(1*FIFOWeight(PreferAll))",
    "-tKBO -Wnone -H'(0*FIFOWeight(PreferAll))'",
    "-tKBO -Wnone -H'(-3*FIFOWeight(PreferAll))'",
    "-tKBO -Wnone -H'(FIFOWeight(PreferAll))'",
    "-tKBO -Wnone -H'(1*FIFOWeight(PreferAll)'",
    "-tKBO -Wnone -H'(1*Mystery(PreferAll))'",
])
def test_parse_rejects_malformed(bad):
    # CEF-level problems surface as CefError, the base of ProtocolError
    with pytest.raises(CefError):
        parse_protocol(bad)


def test_round_trip_random_protocols():
    rng = random.Random(11)
    for _ in range(200):
        p = random_protocol(rng)
        text = render_protocol(p)
        assert parse_protocol(text) == p
        assert render_protocol(parse_protocol(text)) == text


def test_digest_stable_and_distinct():
    p1 = parse_protocol(MINIMAL)
    p2 = parse_protocol(EXAMPLE_SHAPED)
    assert protocol_digest(p1) == protocol_digest(parse_protocol(MINIMAL))
    assert protocol_digest(p1) != protocol_digest(p2)
    assert len(protocol_digest(p1)) == 16


def test_protocol_invariants():
    cef = random_cef(random.Random(0))
    with pytest.raises(ProtocolError):
        Protocol(Ordering.KBO, LiteralSelection.NONE, ())
    with pytest.raises(ProtocolError):
        Protocol(Ordering.KBO, LiteralSelection.NONE, ((0, cef),))


# ---------------------------------------------------------------------------
# Value sets

def test_load_value_sets_defaults():
    d = load_value_sets()
    assert d["symbol_weight"] == (F(1, 2), F(1), F(2), F(3), F(5))
    assert d["frequency"] == (1, 2, 4, 6, 8, 13, 16, 20)
    assert d["doc_source"] == (DocSource.AX, DocSource.PRO)


def test_load_value_sets_from_file(tmp_path):
    path = tmp_path / "domains.json"
    path.write_text(json.dumps({
        "symbol_weight": ["1", "4"], "multiplier": ["0.5", "1"],
        "cost": ["1"], "signed": ["-1", "1"],
        "doc_source": ["ax", "pro"], "frequency": [1, 3],
    }))
    d = load_value_sets(str(path))
    assert d["symbol_weight"] == (F(1), F(4))
    assert d["frequency"] == (1, 3)


def test_load_value_sets_rejects_duplicates(tmp_path):
    path = tmp_path / "domains.json"
    path.write_text(json.dumps({
        "symbol_weight": ["1", "1"], "multiplier": ["1"],
        "cost": ["1"], "signed": ["1"],
        "doc_source": ["ax"], "frequency": [1],
    }))
    with pytest.raises(ProtocolError):
        load_value_sets(str(path))


# ---------------------------------------------------------------------------
# Global space

def test_global_space_size_formula():
    rng = random.Random(5)
    C = random_collection(rng, 50)
    space = global_space(C, 6)
    assert space.size() == 2 * 3 * (50 * 8) * (51 * 8) ** 5


def test_global_space_single_slot_enumeration():
    rng = random.Random(6)
    C = random_collection(rng, 1)
    space = global_space(C, 1)
    configs = list(space.iter_configs())
    assert len(configs) == 2 * 3 * 1 * 8 == 48
    protos = {render_protocol(space.decode(c)) for c in configs}
    assert len(protos) == 48


def test_global_decode_total_and_slot1_never_off():
    rng = random.Random(7)
    C = random_collection(rng, 5)
    space = global_space(C, 3)
    for _ in range(300):
        cfg = space.random_config(rng)
        p = space.decode(cfg)
        assert 1 <= len(p.cefs) <= 3
    slot1 = next(prm for prm in space.params if prm.name == "slot1_cef")
    assert OFF not in slot1.domain
    slot2 = next(prm for prm in space.params if prm.name == "slot2_cef")
    assert OFF in slot2.domain


def test_off_slot_frequency_does_not_change_decoding():
    rng = random.Random(8)
    C = random_collection(rng, 3)
    space = global_space(C, 2)
    cfg = space.make_config({
        "ordering": Ordering.NONE, "literal_selection": LiteralSelection.NONE,
        "slot1_cef": C[0], "slot1_freq": 4,
        "slot2_cef": OFF, "slot2_freq": 1,
    })
    other = cfg.with_value("slot2_freq", 20)
    assert space.decode(cfg) == space.decode(other)
    assert cfg.digest() != other.digest()


def test_frequency_params_are_ladders():
    space = global_space(random_collection(random.Random(9), 2), 2)
    for prm in space.params:
        assert prm.ladder == prm.name.endswith("_freq")


def test_encode_global_round_trip():
    rng = random.Random(10)
    C = random_collection(rng, 8)
    space = global_space(C, 4)
    freq_dom = space.domain("slot1_freq")
    for _ in range(100):
        k = rng.randint(1, 4)
        cefs = tuple((rng.choice(freq_dom), rng.choice(C)) for _ in range(k))
        p = Protocol(rng.choice(list(Ordering)), rng.choice(list(LiteralSelection)), cefs)
        cfg = encode_global(p, space)
        assert space.contains(cfg)
        assert space.decode(cfg) == p


def test_encode_global_needs_representable_protocol():
    rng = random.Random(12)
    C = random_collection(rng, 2)
    space = global_space(C, 1)
    stranger = random_collection(random.Random(99), 3)[-1]
    assert stranger not in C
    p = Protocol(Ordering.KBO, LiteralSelection.NONE, ((1, stranger),))
    with pytest.raises(ProtocolError):
        encode_global(p, space)
    too_many = Protocol(Ordering.KBO, LiteralSelection.NONE,
                        ((1, C[0]), (1, C[1])))
    with pytest.raises(ProtocolError):
        encode_global(too_many, space)


def test_include_freqs_extends_ladder():
    C = random_collection(random.Random(13), 1)
    space = global_space(C, 1, include_freqs=[7, 99])
    assert space.domain("slot1_freq") == (1, 2, 4, 6, 7, 8, 13, 16, 20, 99)


# ---------------------------------------------------------------------------
# Fine space and conversions

def test_fine_space_argument_free_function():
    p = parse_protocol(MINIMAL)
    space = fine_space(p)
    assert [prm.name for prm in space.params] == ["slot1_priority"]
    assert space.params[0].domain == tuple(PriorityFn)


def test_fine_space_covers_example_arguments():
    p = parse_protocol(EXAMPLE_SHAPED)
    space = fine_space(p)
    names = [prm.name for prm in space.params]
    assert names == [
        "slot1_priority", "slot1_c_f", "slot1_c_v", "slot1_term_pen",
        "slot1_lit_pen", "slot1_pos_mult",
        "slot2_priority", "slot2_c_f", "slot2_c_v", "slot2_pos_mult",
    ]
    # lit_pen=3 sits outside the multiplier preset, so it gets appended
    lit_pen = next(prm for prm in space.params if prm.name == "slot1_lit_pen")
    assert lit_pen.domain[-1] == 3
    assert set(load_value_sets()["multiplier"]) < set(lit_pen.domain)
    # every current value is inside its domain
    cfg = lift_to_fine(p, space)
    assert space.contains(cfg)


def test_lift_decodes_back_to_theta1():
    rng = random.Random(21)
    for _ in range(100):
        p = random_protocol(rng)
        space = fine_space(p)
        assert space.decode(lift_to_fine(p, space)) == p


def test_fine_space_freezes_shape():
    p = parse_protocol(EXAMPLE_SHAPED)
    space = fine_space(p)
    rng = random.Random(22)
    for _ in range(50):
        q = space.decode(space.random_config(rng))
        assert q.ordering is p.ordering
        assert q.literal_selection is p.literal_selection
        assert [f for f, _ in q.cefs] == [13, 2]
        assert [c.weight.name for _, c in q.cefs] == ["Refinedweight", "Clauseweight"]


def test_project_extends_collection_only_with_novel_cefs():
    rng = random.Random(23)
    C = random_collection(rng, 6)
    p = Protocol(Ordering.NONE, LiteralSelection.NONE, ((2, C[0]), (1, C[3])))
    space = fine_space(p)
    cfg = lift_to_fine(p, space)

    gcfg, ext, gspace = project_to_global(cfg, space, C, c_cef=4)
    assert ext == C                      # nothing novel
    assert gspace.decode(gcfg) == p

    mutated = cfg.with_value("slot1_priority",
                             PriorityFn.PREFER_UNIT_GROUND_GOALS
                             if cfg["slot1_priority"] is not PriorityFn.PREFER_UNIT_GROUND_GOALS
                             else PriorityFn.PREFER_ALL)
    p2 = space.decode(mutated)
    gcfg2, ext2, gspace2 = project_to_global(mutated, space, C, c_cef=4)
    assert gspace2.decode(gcfg2) == p2
    assert ext2[:len(C)] == C
    assert len(ext2) == len(C) + 1       # exactly the one changed CEF


def test_global_fine_global_round_trip_without_changes():
    rng = random.Random(24)
    for _ in range(50):
        C = random_collection(rng, 5)
        gspace = global_space(C, 3)
        gcfg = gspace.random_config(rng)
        p = gspace.decode(gcfg)
        fspace = fine_space(p)
        fcfg = lift_to_fine(p, fspace)
        gcfg2, ext, gspace2 = project_to_global(fcfg, fspace, C, c_cef=3)
        assert ext == C
        assert gspace2.decode(gcfg2) == p


# ---------------------------------------------------------------------------
# Config plumbing

def test_config_accessors_and_with_value():
    cfg = Config((("a", 1), ("b", 2)))
    assert cfg["a"] == 1 and cfg.get("c") is None
    cfg2 = cfg.with_value("a", 9)
    assert cfg2["a"] == 9 and cfg["a"] == 1
    with pytest.raises(KeyError):
        cfg.with_value("zzz", 0)


def test_make_config_validates():
    space = global_space(random_collection(random.Random(1), 1), 1)
    with pytest.raises(ProtocolError):
        space.make_config({"ordering": Ordering.KBO})
    with pytest.raises(ProtocolError):
        space.make_config({
            "ordering": Ordering.KBO, "literal_selection": LiteralSelection.NONE,
            "slot1_cef": random_cef(random.Random(2)), "slot1_freq": 1,
        })


def test_iter_configs_deterministic():
    space = global_space(random_collection(random.Random(3), 2), 1)
    a = [c.digest() for c in space.iter_configs()]
    b = [c.digest() for c in space.iter_configs()]
    assert a == b and len(a) == space.size()


def test_random_config_seed_determinism():
    space = global_space(random_collection(random.Random(4), 3), 2)
    a = [space.random_config(random.Random(42)).digest() for _ in range(5)]
    b = [space.random_config(random.Random(42)).digest() for _ in range(5)]
    assert a == b


def test_param_def_validation():
    with pytest.raises(ProtocolError):
        ParamDef("p", ())
    with pytest.raises(ProtocolError):
        ParamDef("p", (1, 1))
