"""Explicit blocklength-one network codes and their exact evaluation.

A code fixes finite message/key alphabets per source, an alphabet and a
function table per edge, and a decoder table per (sink, demanded source).
Evaluation enumerates every (message, key) tuple under the uniform
independent input distribution and reports everything exactly: the joint
pmf, decoding error probabilities, per-wiretap-set leakage, the full
entropy vector, and both rate readings of each edge (realized H(W_e) vs
worst-case log|W_e|).  n-fold product codes have the same single-letter
statistics, so blocklength-1 numbers are the whole story.

Table domain ordering (also the JSON layout): an edge out of a source s
is indexed by m*|K_s| + k; any other edge by the values of the tail's
in-edges sorted by edge id, row-major with the first in-edge most
significant.  Decoders index the sink's in-edges the same way.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

from .entropy import EntropyVector, GroundSet, SizeCapError, entropy_vector_of_pmf
from .network import Network, topological_order
from .rationals import dyadic_log2

STATE_CAP = 1 << 24


class CodeFormatError(ValueError):
    """Malformed code document or tables inconsistent with the network."""


@dataclass(frozen=True)
class CodeSpec:
    """Alphabet sizes and function tables, all flat and immutable."""

    msg_sizes: tuple[tuple[str, int], ...]
    key_sizes: tuple[tuple[str, int], ...]
    edge_alphabets: tuple[tuple[str, int], ...]
    edge_tables: tuple[tuple[str, tuple[int, ...]], ...]
    decoders: tuple[tuple[tuple[str, str], tuple[int, ...]], ...]

    def msg_size(self, s: str) -> int:
        return dict(self.msg_sizes)[s]

    def key_size(self, s: str) -> int:
        return dict(self.key_sizes)[s]

    def alphabet(self, e: str) -> int:
        return dict(self.edge_alphabets)[e]

    def table(self, e: str) -> tuple[int, ...]:
        return dict(self.edge_tables)[e]

    def decoder(self, t: str, s: str) -> tuple[int, ...]:
        return dict(self.decoders)[(t, s)]


def parse_code(text: str) -> CodeSpec:
    """Parse the JSON code format (closed key set, flat tables)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CodeFormatError(f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(doc, dict) or set(doc) != {"sources", "edges", "decoders"}:
        raise CodeFormatError('top level must have exactly "sources", "edges", "decoders"')

    msg, key = [], []
    for s, entry in sorted(doc["sources"].items()):
        if set(entry) != {"message_size", "key_size"}:
            raise CodeFormatError(f"source {s!r} needs exactly message_size and key_size")
        for field in ("message_size", "key_size"):
            v = entry[field]
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise CodeFormatError(f"{field} of source {s!r} must be a positive int")
        msg.append((s, entry["message_size"]))
        key.append((s, entry["key_size"]))

    alphabets, tables = [], []
    for e, entry in sorted(doc["edges"].items()):
        if set(entry) != {"alphabet", "table"}:
            raise CodeFormatError(f"edge {e!r} needs exactly alphabet and table")
        size = entry["alphabet"]
        if not isinstance(size, int) or isinstance(size, bool) or size < 1:
            raise CodeFormatError(f"alphabet of edge {e!r} must be a positive int")
        tab = entry["table"]
        if not isinstance(tab, list) or not all(
                isinstance(v, int) and not isinstance(v, bool) for v in tab):
            raise CodeFormatError(f"table of edge {e!r} must be a flat int array")
        alphabets.append((e, size))
        tables.append((e, tuple(tab)))

    decs = []
    for t, per_source in sorted(doc["decoders"].items()):
        if not isinstance(per_source, dict):
            raise CodeFormatError(f"decoders[{t!r}] must map source -> table")
        for s, tab in sorted(per_source.items()):
            if not isinstance(tab, list) or not all(
                    isinstance(v, int) and not isinstance(v, bool) for v in tab):
                raise CodeFormatError(f"decoder table ({t!r},{s!r}) must be a flat int array")
            decs.append(((t, s), tuple(tab)))

    return CodeSpec(tuple(msg), tuple(key), tuple(alphabets), tuple(tables), tuple(decs))


def code_to_json(code: CodeSpec) -> str:
    doc = {
        "sources": {
            s: {"message_size": m, "key_size": dict(code.key_sizes)[s]}
            for s, m in code.msg_sizes
        },
        "edges": {
            e: {"alphabet": a, "table": list(dict(code.edge_tables)[e])}
            for e, a in code.edge_alphabets
        },
        "decoders": {},
    }
    for (t, s), tab in code.decoders:
        doc["decoders"].setdefault(t, {})[s] = list(tab)
    return json.dumps(doc, indent=2, sort_keys=True)


def edge_processing_order(net: Network) -> list:
    """Edges sorted so every edge's inputs are already computed."""
    pos = {v: i for i, v in enumerate(topological_order(net))}
    return sorted(net.edges, key=lambda e: (pos[e.tail], e.id))


def domain_edges(net: Network, e) -> list:
    return sorted(net.in_edges(e.tail), key=lambda x: x.id)


def validate_code(net: Network, code: CodeSpec, require_decoders: bool = True) -> None:
    """Raise CodeFormatError unless tables are total and in range.

    Decoder tables may be omitted when require_decoders is false; the
    simulators can derive decoders or decode by joint typicality.
    """
    msg, key = dict(code.msg_sizes), dict(code.key_sizes)
    alph, tabs = dict(code.edge_alphabets), dict(code.edge_tables)
    decs = dict(code.decoders)
    for s in net.sources:
        if s not in msg or s not in key:
            raise CodeFormatError(f"code missing alphabet sizes for source {s!r}")
    for e in net.edges:
        if e.id not in alph or e.id not in tabs:
            raise CodeFormatError(f"code missing edge {e.id!r}")
        if e.tail in net.sources:
            dom = msg[e.tail] * key[e.tail]
        else:
            dom = math.prod(alph[x.id] for x in domain_edges(net, e))
            if not net.in_edges(e.tail):
                raise CodeFormatError(
                    f"edge {e.id!r} leaves {e.tail!r}, which has no inputs to encode")
        if len(tabs[e.id]) != dom:
            raise CodeFormatError(
                f"table of edge {e.id!r} has {len(tabs[e.id])} entries, domain is {dom}")
        if any(not 0 <= v < alph[e.id] for v in tabs[e.id]):
            raise CodeFormatError(f"table of edge {e.id!r} has out-of-range symbols")
    for t in net.sinks:
        dom = math.prod(alph[x.id] for x in sorted(net.in_edges(t.node), key=lambda x: x.id))
        for s in t.beta:
            if (t.node, s) not in decs:
                if require_decoders:
                    raise CodeFormatError(f"code missing decoder for ({t.node!r}, {s!r})")
                continue
            tab = decs[(t.node, s)]
            if len(tab) != dom:
                raise CodeFormatError(
                    f"decoder ({t.node!r},{s!r}) has {len(tab)} entries, domain is {dom}")
            if any(not 0 <= v < msg[s] for v in tab):
                raise CodeFormatError(f"decoder ({t.node!r},{s!r}) outputs out of range")


@dataclass(frozen=True)
class CodeEvaluation:
    """Everything measurable about a code, computed exactly.

    ``leakage`` maps a wiretap-set label (comma-joined edge ids) to
    I(all messages; observed edges) in bits.  ``rate_realized`` is
    H(W_e); ``rate_worst_case`` is log2|W_e| (Fraction when the alphabet
    is a power of two).
    """

    ground: GroundSet
    pmf: dict
    errors: tuple[tuple[tuple[str, str], Fraction], ...]
    leakage: tuple[tuple[str, "Fraction | float"], ...]
    entropy: EntropyVector
    rate_realized: tuple[tuple[str, "Fraction | float"], ...]
    rate_worst_case: tuple[tuple[str, "Fraction | float"], ...]

    def error_of(self, t: str, s: str) -> Fraction:
        return dict(self.errors)[(t, s)]

    def leakage_of(self, label: str):
        return dict(self.leakage)[label]


def log2_size(size: int) -> "Fraction | float":
    k = dyadic_log2(Fraction(size))
    return Fraction(k) if k is not None else math.log2(size)


def evaluate_code(net: Network, code: CodeSpec, state_cap: int = STATE_CAP) -> CodeEvaluation:
    """Exact exhaustive evaluation under uniform independent inputs."""
    validate_code(net, code)
    srcs = sorted(net.sources)
    msg, key = dict(code.msg_sizes), dict(code.key_sizes)
    alph, tabs = dict(code.edge_alphabets), dict(code.edge_tables)
    decs = dict(code.decoders)

    total = math.prod(msg[s] * key[s] for s in srcs)
    if total > state_cap:
        raise SizeCapError(
            f"evaluation would enumerate {total} input states (cap {state_cap})")

    ground = GroundSet.from_network(net)
    order = edge_processing_order(net)
    dom_edges = {e.id: [x.id for x in domain_edges(net, e)] for e in order}

    prob = Fraction(1, total)
    pmf: dict[tuple, Fraction] = {}
    err_counts = {(t.node, s): 0 for t in net.sinks for s in t.beta}

    # mixed-radix enumeration of ((m_s, k_s))_s
    radices = []
    for s in srcs:
        radices.append(msg[s])
        radices.append(key[s])
    state = [0] * len(radices)
    while True:
        values: dict[str, int] = {}
        for i, s in enumerate(srcs):
            values[f"m:{s}"] = state[2 * i]
            values[f"k:{s}"] = state[2 * i + 1]
        for e in order:
            if e.tail in net.sources:
                idx = values[f"m:{e.tail}"] * key[e.tail] + values[f"k:{e.tail}"]
            else:
                idx = 0
                for x in dom_edges[e.id]:
                    idx = idx * alph[x] + values[f"e:{x}"]
            values[f"e:{e.id}"] = tabs[e.id][idx]
        outcome = tuple(values[lab] for lab in ground.labels)
        pmf[outcome] = pmf.get(outcome, Fraction(0)) + prob
        for t in net.sinks:
            idx = 0
            for x in sorted(net.in_edges(t.node), key=lambda y: y.id):
                idx = idx * alph[x.id] + values[f"e:{x.id}"]
            for s in t.beta:
                if decs[(t.node, s)][idx] != values[f"m:{s}"]:
                    err_counts[(t.node, s)] += 1
        # advance the mixed-radix counter
        for i in range(len(state) - 1, -1, -1):
            state[i] += 1
            if state[i] < radices[i]:
                break
            state[i] = 0
        else:
            break

    vec = entropy_vector_of_pmf(pmf, ground)
    all_msgs = 0
    for s in srcs:
        all_msgs |= ground.message_mask(s)

    leak = []
    for alpha in net.wiretap_sets:
        label = ",".join(alpha)
        amask = 0
        for eid in alpha:
            amask |= ground.edge_mask(eid)
        leak.append((label, vec.h(all_msgs) + vec.h(amask) - vec.h(all_msgs | amask)))

    errors = tuple(sorted((pair, Fraction(c, total)) for pair, c in err_counts.items()))
    r_v = tuple((e, vec.h(ground.edge_mask(e))) for e, _ in code.edge_alphabets)
    r_f = tuple((e, log2_size(a)) for e, a in code.edge_alphabets)
    return CodeEvaluation(ground, pmf, errors, tuple(leak), vec, r_v, r_f)
