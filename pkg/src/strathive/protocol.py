"""Protocols, their command-line style syntax, and tuning configuration spaces.

A protocol fixes the term ordering, the literal selection function, and a
frequency-weighted list of CEFs::

    -tKBO -WSelectFirstNeg -H'(13*Refinedweight(PreferGoals,1,2,2,3,2),2*FIFOWeight(PreferAll))'

Two configuration-space constructions support tuning.  The *global* space
varies the high-level shape: ordering, selection, and which CEFs from a
collection occupy up to ``c_cef`` slots at which frequencies.  The *fine*
space freezes that shape and varies only the priority functions and the
weight-function arguments inside it.  Configurations convert losslessly
between the two layers so tuning phases can hand results to each other.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from importlib import resources
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

from .weights import (
    CEF,
    CefError,
    DocSource,
    PriorityFn,
    WEIGHT_FUNCTIONS,
    make_weight_fn,
    parse_cef,
    parse_rational,
    render_cef,
    render_rational,
)


class ProtocolError(CefError):
    """Malformed protocol text or an unrepresentable configuration."""


class Ordering(str, Enum):
    NONE = "none"
    KBO = "kbo"


class LiteralSelection(str, Enum):
    NONE = "none"
    SELECT_FIRST_NEG = "select_first_negative"
    SELECT_LARGEST_NEG = "select_largest_negative"


_ORDERING_WIRE = {Ordering.NONE: "NONE", Ordering.KBO: "KBO"}
_SELECTION_WIRE = {
    LiteralSelection.NONE: "none",
    LiteralSelection.SELECT_FIRST_NEG: "SelectFirstNeg",
    LiteralSelection.SELECT_LARGEST_NEG: "SelectLargestNeg",
}
_WIRE_ORDERING = {v: k for k, v in _ORDERING_WIRE.items()}
_WIRE_SELECTION = {v: k for k, v in _SELECTION_WIRE.items()}


@dataclass(frozen=True)
class Protocol:
    ordering: Ordering
    literal_selection: LiteralSelection
    cefs: tuple[tuple[int, CEF], ...]

    def __post_init__(self):
        if not self.cefs:
            raise ProtocolError("a protocol needs at least one CEF")
        for freq, cef in self.cefs:
            if not isinstance(freq, int) or freq < 1:
                raise ProtocolError(f"CEF frequency must be a positive integer, got {freq!r}")
            if not isinstance(cef, CEF):
                raise ProtocolError(f"expected a CEF, got {cef!r}")


def _split_top_level(s: str) -> list[str]:
    parts: list[str] = []
    depth = 0
    cur: list[str] = []
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ProtocolError("unbalanced ')' in CEF list")
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ProtocolError("unbalanced '(' in CEF list")
    parts.append("".join(cur))
    return parts


def parse_protocol(text: str) -> Protocol:
    toks = text.strip().split(None, 2)
    if len(toks) != 3:
        raise ProtocolError(f"expected -t… -W… -H'…', got {text!r}")
    t_tok, w_tok, h_tok = toks
    if not t_tok.startswith("-t"):
        raise ProtocolError(f"expected -t flag, got {t_tok!r}")
    ordering = _WIRE_ORDERING.get(t_tok[2:])
    if ordering is None:
        raise ProtocolError(f"unknown term ordering {t_tok[2:]!r}")
    if not w_tok.startswith("-W"):
        raise ProtocolError(f"expected -W flag, got {w_tok!r}")
    selection = _WIRE_SELECTION.get(w_tok[2:])
    if selection is None:
        raise ProtocolError(f"unknown literal selection {w_tok[2:]!r}")
    if not (h_tok.startswith("-H'") and h_tok.endswith("'")):
        raise ProtocolError("heuristic must be quoted as -H'(...)'")
    body = h_tok[3:-1].strip()
    if not (body.startswith("(") and body.endswith(")")):
        raise ProtocolError("heuristic body must be parenthesized")
    cefs: list[tuple[int, CEF]] = []
    for chunk in _split_top_level(body[1:-1]):
        chunk = chunk.strip()
        star = chunk.find("*")
        if star < 0:
            raise ProtocolError(f"missing frequency in {chunk!r}")
        freq_text = chunk[:star].strip()
        try:
            freq = int(freq_text)
        except ValueError as e:
            raise ProtocolError(f"bad frequency {freq_text!r}") from e
        if freq < 1:
            raise ProtocolError(f"frequency must be >= 1, got {freq}")
        cefs.append((freq, parse_cef(chunk[star + 1:])))
    return Protocol(ordering, selection, tuple(cefs))


def render_protocol(p: Protocol) -> str:
    body = ",".join(f"{freq}*{render_cef(cef)}" for freq, cef in p.cefs)
    return (f"-t{_ORDERING_WIRE[p.ordering]}"
            f" -W{_SELECTION_WIRE[p.literal_selection]}"
            f" -H'({body})'")


def protocol_digest(p: Protocol) -> str:
    return hashlib.sha256(render_protocol(p).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Value domains for tuning, configurable through a JSON data file.


_NUMERIC_TYPES = ("symbol_weight", "multiplier", "cost", "signed")


def load_value_sets(source: Union[str, None] = None) -> dict[str, tuple]:
    """Per-argument-type value domains; ``source`` overrides the bundled file."""
    if source is None:
        raw = json.loads(
            resources.files("strathive").joinpath("data/value_sets.json").read_text())
    else:
        with open(source, encoding="utf-8") as f:
            raw = json.load(f)
    out: dict[str, tuple] = {}
    for t in _NUMERIC_TYPES:
        out[t] = tuple(parse_rational(str(v)) for v in raw[t])
    out["doc_source"] = tuple(DocSource(v) for v in raw["doc_source"])
    out["frequency"] = tuple(int(v) for v in raw["frequency"])
    for name, dom in out.items():
        if len(set(dom)) != len(dom) or not dom:
            raise ProtocolError(f"value set {name!r} must be nonempty and distinct")
    return out


# ---------------------------------------------------------------------------
# Configuration spaces.

OFF = "off"  # sentinel for an unused CEF slot in the global space


@dataclass(frozen=True)
class ParamDef:
    """One tunable parameter: a name and an ordered finite domain.

    ``ladder`` restricts the one-exchange neighborhood to adjacent domain
    positions (used for the frequency scale, where jumping ends makes
    little sense).
    """

    name: str
    domain: tuple
    ladder: bool = False

    def __post_init__(self):
        if not self.domain:
            raise ProtocolError(f"parameter {self.name!r} has an empty domain")
        if len(set(self.domain)) != len(self.domain):
            raise ProtocolError(f"parameter {self.name!r} has duplicate values")


def _value_text(v) -> str:
    if isinstance(v, CEF):
        return render_cef(v)
    if isinstance(v, Fraction):
        return render_rational(v)
    if isinstance(v, Enum):
        return str(v.value)
    return str(v)


@dataclass(frozen=True)
class Config:
    """A total assignment, stored in the owning space's parameter order."""

    assignment: tuple[tuple[str, object], ...]

    def __post_init__(self):
        object.__setattr__(self, "_map", dict(self.assignment))

    def __getitem__(self, name: str):
        return self._map[name]

    def get(self, name: str, default=None):
        return self._map.get(name, default)

    def with_value(self, name: str, value) -> "Config":
        if name not in self._map:
            raise KeyError(name)
        return Config(tuple((k, value if k == name else v)
                            for k, v in self.assignment))

    def digest(self) -> str:
        text = "&".join(f"{k}={_value_text(v)}" for k, v in self.assignment)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


class ConfigSpace:
    """A finite product space with a total decoder to Protocol.

    ``kind`` is "global" or "fine"; generic synthetic spaces used in tests
    may pass ``kind="test"`` with a decoder of their choice.
    """

    def __init__(self, params: Sequence[ParamDef], kind: str,
                 decode: Callable[[Config], Protocol]):
        if len({p.name for p in params}) != len(params):
            raise ProtocolError("duplicate parameter names")
        self.params = tuple(params)
        self.kind = kind
        self.decode = decode
        self._domains = {p.name: p.domain for p in self.params}

    def domain(self, name: str) -> tuple:
        return self._domains[name]

    def size(self) -> int:
        n = 1
        for p in self.params:
            n *= len(p.domain)
        return n

    def contains(self, cfg: Config) -> bool:
        if len(cfg.assignment) != len(self.params):
            return False
        return all(name == p.name and value in self._domains[p.name]
                   for (name, value), p in zip(cfg.assignment, self.params))

    def make_config(self, mapping) -> Config:
        try:
            cfg = Config(tuple((p.name, mapping[p.name]) for p in self.params))
        except KeyError as e:
            raise ProtocolError(f"missing value for parameter {e.args[0]!r}") from e
        if not self.contains(cfg):
            raise ProtocolError("value outside the parameter domain")
        return cfg

    def iter_configs(self) -> Iterator[Config]:
        """Every configuration, in odometer order over parameter domains."""
        def rec(i: int, acc: list):
            if i == len(self.params):
                yield Config(tuple(acc))
                return
            p = self.params[i]
            for v in p.domain:
                acc.append((p.name, v))
                yield from rec(i + 1, acc)
                acc.pop()

        yield from rec(0, [])

    def random_config(self, rng) -> Config:
        return Config(tuple((p.name, p.domain[rng.randrange(len(p.domain))])
                            for p in self.params))


def _merged_freq_domain(domains: dict, include_freqs: Iterable[int]) -> tuple[int, ...]:
    merged = set(domains["frequency"])
    merged.update(include_freqs)
    return tuple(sorted(merged))


def global_space(collection: Sequence[CEF], c_cef: int,
                 domains: Optional[dict] = None,
                 include_freqs: Iterable[int] = ()) -> ConfigSpace:
    """Space over protocol shape: ordering, selection, CEF slots from a
    collection.  Slot 1 can never be off, so decoding is total.

    ``include_freqs`` extends the frequency ladder so that a pre-existing
    protocol (whose frequencies may fall outside the preset) is encodable.
    """
    if not collection:
        raise ProtocolError("CEF collection must be nonempty")
    if c_cef < 1:
        raise ProtocolError("c_cef must be >= 1")
    domains = domains or load_value_sets()
    freqs = _merged_freq_domain(domains, include_freqs)
    cefs = tuple(collection)
    params: list[ParamDef] = [
        ParamDef("ordering", (Ordering.NONE, Ordering.KBO)),
        ParamDef("literal_selection", (LiteralSelection.NONE,
                                       LiteralSelection.SELECT_FIRST_NEG,
                                       LiteralSelection.SELECT_LARGEST_NEG)),
    ]
    for i in range(1, c_cef + 1):
        dom = cefs if i == 1 else cefs + (OFF,)
        params.append(ParamDef(f"slot{i}_cef", dom))
        params.append(ParamDef(f"slot{i}_freq", freqs, ladder=True))

    def decode(cfg: Config) -> Protocol:
        out: list[tuple[int, CEF]] = []
        for i in range(1, c_cef + 1):
            cef = cfg[f"slot{i}_cef"]
            if cef == OFF:
                continue
            out.append((cfg[f"slot{i}_freq"], cef))
        return Protocol(cfg["ordering"], cfg["literal_selection"], tuple(out))

    return ConfigSpace(params, "global", decode)


def encode_global(p: Protocol, space: ConfigSpace) -> Config:
    """Embed a protocol into a global space; CEFs fill slots in order."""
    if space.kind != "global":
        raise ProtocolError("encode_global needs a global space")
    slots = sum(1 for prm in space.params if prm.name.endswith("_cef"))
    if len(p.cefs) > slots:
        raise ProtocolError(f"protocol has {len(p.cefs)} CEFs but space has {slots} slots")
    mapping: dict[str, object] = {
        "ordering": p.ordering,
        "literal_selection": p.literal_selection,
    }
    for i in range(1, slots + 1):
        if i <= len(p.cefs):
            freq, cef = p.cefs[i - 1]
            mapping[f"slot{i}_cef"] = cef
            mapping[f"slot{i}_freq"] = freq
        else:
            mapping[f"slot{i}_cef"] = OFF
            mapping[f"slot{i}_freq"] = space.domain(f"slot{i}_freq")[0]
    try:
        return space.make_config(mapping)
    except ProtocolError as e:
        raise ProtocolError(f"protocol not representable in this space: {e}") from e


def fine_space(theta1: Protocol, domains: Optional[dict] = None) -> ConfigSpace:
    """Space over the insides of ``theta1``: priorities and argument values.

    Shape stays frozen (ordering, selection, frequencies, which weight
    function sits in each slot).  Each argument's domain is the preset for
    its type, extended with the current value so the identity embedding
    always exists.
    """
    domains = domains or load_value_sets()
    prio_domain = tuple(PriorityFn)
    params: list[ParamDef] = []
    for i, (_freq, cef) in enumerate(theta1.cefs, 1):
        params.append(ParamDef(f"slot{i}_priority", prio_domain))
        spec = WEIGHT_FUNCTIONS[cef.weight.name]
        values = cef.weight.arg_values()
        for arg_name, arg_type, current in zip(cef.weight.arg_names(),
                                               spec.arg_types, values):
            preset = domains[arg_type]
            dom = preset if current in preset else preset + (current,)
            params.append(ParamDef(f"slot{i}_{arg_name}", dom))

    def decode(cfg: Config) -> Protocol:
        out: list[tuple[int, CEF]] = []
        for i, (freq, cef) in enumerate(theta1.cefs, 1):
            args = [cfg[f"slot{i}_{n}"] for n in cef.weight.arg_names()]
            out.append((freq, CEF(cfg[f"slot{i}_priority"],
                                  make_weight_fn(cef.weight.name, args))))
        return Protocol(theta1.ordering, theta1.literal_selection, tuple(out))

    return ConfigSpace(params, "fine", decode)


def lift_to_fine(theta1: Protocol, space: Optional[ConfigSpace] = None) -> Config:
    """The identity embedding of ``theta1`` into its fine space."""
    space = space or fine_space(theta1)
    mapping: dict[str, object] = {}
    for i, (_freq, cef) in enumerate(theta1.cefs, 1):
        mapping[f"slot{i}_priority"] = cef.priority
        for n, v in zip(cef.weight.arg_names(), cef.weight.arg_values()):
            mapping[f"slot{i}_{n}"] = v
    return space.make_config(mapping)


def embed_protocol(p: Protocol, collection: Sequence[CEF], c_cef: int,
                   domains: Optional[dict] = None):
    """A global space guaranteed to contain ``p``, plus its embedding.

    Returns ``(config, extended_collection, global_space)``: CEFs of ``p``
    missing from the collection are appended, and its frequencies merged
    into the ladder, so the embedding always exists.
    """
    extended = list(collection)
    for _freq, cef in p.cefs:
        if cef not in extended:
            extended.append(cef)
    gspace = global_space(extended, max(c_cef, len(p.cefs)), domains,
                          include_freqs=[f for f, _ in p.cefs])
    return encode_global(p, gspace), extended, gspace


def project_to_global(fine_cfg: Config, fspace: ConfigSpace,
                      collection: Sequence[CEF], c_cef: int,
                      domains: Optional[dict] = None):
    """Convert a fine configuration back to the global layer.

    Returns ``(config, extended_collection, global_space)``: novel CEFs the
    fine phase invented are appended to the collection so the next global
    space can host the protocol unchanged.
    """
    return embed_protocol(fspace.decode(fine_cfg), collection, c_cef, domains)
