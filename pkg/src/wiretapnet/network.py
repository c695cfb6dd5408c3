"""Directed acyclic network container for secure-transmission problems.

A network is a DAG with unit-direction edges of nonnegative rational
capacity, a set of source nodes (each owning one message and one key),
sink nodes with per-sink demand lists, and a collection of wiretap sets
(subsets of edges an eavesdropper may observe jointly).

The JSON file format is closed: unknown keys are rejected so that typos
fail loudly.  Capacities are rational strings ("3/2" or "2"), never
floats.  ``key_only_sources`` is an optional extension key used for
sources that carry a key but no message (their message-rate coordinate
is pinned to zero downstream); plain networks round-trip without it.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from fractions import Fraction

from .rationals import format_rational, parse_rational

_TOP_KEYS = {"nodes", "edges", "sources", "sinks", "wiretap_sets", "key_only_sources"}
_EDGE_KEYS = {"id", "tail", "head", "cap"}
_SINK_KEYS = {"node", "beta"}


class NetworkFormatError(ValueError):
    """Malformed network document (syntax, unknown keys, dangling refs)."""


class CycleError(ValueError):
    """Raised when a topological order is requested for a cyclic graph."""


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str
    head: str
    cap: Fraction


@dataclass(frozen=True)
class Sink:
    node: str
    beta: tuple[str, ...]  # demanded source ids, file order


@dataclass(frozen=True)
class Network:
    """Immutable network; all queries are side-effect free."""

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    sources: tuple[str, ...]
    sinks: tuple[Sink, ...]
    wiretap_sets: tuple[tuple[str, ...], ...]
    key_only_sources: frozenset[str] = field(default=frozenset())

    def edge(self, edge_id: str) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(edge_id)

    def in_edges(self, node: str) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.head == node)

    def out_edges(self, node: str) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.tail == node)

    def demands(self, sink_node: str) -> tuple[str, ...]:
        for t in self.sinks:
            if t.node == sink_node:
                return t.beta
        raise KeyError(sink_node)

    @property
    def intermediate_nodes(self) -> tuple[str, ...]:
        ends = set(self.sources) | {t.node for t in self.sinks}
        return tuple(v for v in self.nodes if v not in ends)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[tuple[str, str], ...]  # (rule id, human detail)


def _fail(msg: str) -> NetworkFormatError:
    return NetworkFormatError(msg)


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise _fail(f"unknown key(s) {sorted(extra)} in {where}")


def parse_network(text: str) -> Network:
    """Parse a JSON network document.

    Enforces syntax, the closed key set, unique ids and referential
    integrity.  Structural soundness (acyclicity, degree rules, demand
    sanity) is the job of :func:`validate`, so degenerate but
    well-formed documents still produce a Network.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _fail(f"invalid JSON at line {exc.lineno} col {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise _fail("top-level document must be an object")
    _check_keys(doc, _TOP_KEYS, "network document")
    for key in ("nodes", "edges", "sources", "sinks", "wiretap_sets"):
        if key not in doc:
            raise _fail(f"missing required key {key!r}")
        if not isinstance(doc[key], list):
            raise _fail(f"{key!r} must be an array")

    nodes = []
    for v in doc["nodes"]:
        if not isinstance(v, str):
            raise _fail(f"node id {v!r} is not a string")
        if v in nodes:
            raise _fail(f"duplicate node id {v!r}")
        nodes.append(v)
    node_set = set(nodes)

    edges = []
    seen_edges: set[str] = set()
    for item in doc["edges"]:
        if not isinstance(item, dict):
            raise _fail("each edge must be an object")
        _check_keys(item, _EDGE_KEYS, f"edge {item.get('id')!r}")
        for key in _EDGE_KEYS:
            if key not in item:
                raise _fail(f"edge missing key {key!r}: {item!r}")
        eid = item["id"]
        if not isinstance(eid, str):
            raise _fail(f"edge id {eid!r} is not a string")
        if eid in seen_edges:
            raise _fail(f"duplicate edge id {eid!r}")
        seen_edges.add(eid)
        for end in ("tail", "head"):
            if item[end] not in node_set:
                raise _fail(f"edge {eid!r} references unknown node {item[end]!r}")
        try:
            cap = parse_rational(item["cap"])
        except ValueError as exc:
            raise _fail(f"edge {eid!r}: bad capacity: {exc}") from None
        edges.append(Edge(eid, item["tail"], item["head"], cap))

    sources = []
    for s in doc["sources"]:
        if s not in node_set:
            raise _fail(f"source {s!r} is not a declared node")
        if s in sources:
            raise _fail(f"duplicate source {s!r}")
        sources.append(s)

    sinks = []
    seen_sinks: set[str] = set()
    for item in doc["sinks"]:
        if not isinstance(item, dict):
            raise _fail("each sink must be an object")
        _check_keys(item, _SINK_KEYS, f"sink {item.get('node')!r}")
        for key in _SINK_KEYS:
            if key not in item:
                raise _fail(f"sink missing key {key!r}: {item!r}")
        t = item["node"]
        if t not in node_set:
            raise _fail(f"sink {t!r} is not a declared node")
        if t in seen_sinks:
            raise _fail(f"duplicate sink {t!r}")
        seen_sinks.add(t)
        beta = []
        for s in item["beta"]:
            if s not in node_set:
                raise _fail(f"sink {t!r} demands unknown node {s!r}")
            if s in beta:
                raise _fail(f"sink {t!r} demands {s!r} twice")
            beta.append(s)
        sinks.append(Sink(t, tuple(beta)))

    taps = []
    for group in doc["wiretap_sets"]:
        if not isinstance(group, list):
            raise _fail("each wiretap set must be an array of edge ids")
        members = []
        for eid in group:
            if eid not in seen_edges:
                raise _fail(f"wiretap set references unknown edge {eid!r}")
            if eid in members:
                raise _fail(f"wiretap set repeats edge {eid!r}")
            members.append(eid)
        taps.append(tuple(members))

    key_only = frozenset(doc.get("key_only_sources", []))
    for s in key_only:
        if s not in sources:
            raise _fail(f"key_only_sources entry {s!r} is not a source")

    return Network(
        nodes=tuple(nodes),
        edges=tuple(edges),
        sources=tuple(sources),
        sinks=tuple(sinks),
        wiretap_sets=tuple(taps),
        key_only_sources=key_only,
    )


def serialize_network(net: Network) -> str:
    """Canonical JSON for a Network; parse(serialize(net)) == net."""
    doc: dict = {
        "nodes": list(net.nodes),
        "edges": [
            {"id": e.id, "tail": e.tail, "head": e.head, "cap": format_rational(e.cap)}
            for e in net.edges
        ],
        "sources": list(net.sources),
        "sinks": [{"node": t.node, "beta": list(t.beta)} for t in net.sinks],
        "wiretap_sets": [list(group) for group in net.wiretap_sets],
    }
    if net.key_only_sources:
        doc["key_only_sources"] = sorted(net.key_only_sources)
    return json.dumps(doc, indent=2) + "\n"


def validate(net: Network) -> ValidationReport:
    """Check structural invariants, reporting every violation found.

    Reachability of sinks is deliberately not analysed; a sink with
    in-edges but no usable path is a capacity-zero question, not a
    validity one.  A demanded sink with no in-edges at all is flagged.
    """
    bad: list[tuple[str, str]] = []

    sink_nodes = {t.node for t in net.sinks}
    overlap = set(net.sources) & sink_nodes
    if overlap:
        bad.append(("source-sink-overlap", f"nodes both source and sink: {sorted(overlap)}"))

    for s in net.sources:
        incoming = net.in_edges(s)
        if incoming:
            bad.append(("source-has-inputs", f"source {s!r} has in-edges {[e.id for e in incoming]}"))
    for t in net.sinks:
        outgoing = net.out_edges(t.node)
        if outgoing:
            bad.append(("sink-has-outputs", f"sink {t.node!r} has out-edges {[e.id for e in outgoing]}"))
        unknown = [s for s in t.beta if s not in net.sources]
        if unknown:
            bad.append(("demand-not-a-source", f"sink {t.node!r} demands non-sources {unknown}"))
        if t.beta and not net.in_edges(t.node):
            bad.append(("demand-without-inputs", f"sink {t.node!r} demands {list(t.beta)} but has no in-edges"))

    for e in net.edges:
        if e.cap < 0:
            bad.append(("negative-capacity", f"edge {e.id!r} has capacity {e.cap}"))

    try:
        topological_order(net)
    except CycleError as exc:
        bad.append(("cycle", str(exc)))

    return ValidationReport(ok=not bad, violations=tuple(bad))


def topological_order(net: Network) -> tuple[str, ...]:
    """Kahn's algorithm; ties broken by lexicographically least node id."""
    indeg = {v: 0 for v in net.nodes}
    for e in net.edges:
        indeg[e.head] += 1
    ready = [v for v in net.nodes if indeg[v] == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for e in net.out_edges(v):
            indeg[e.head] -= 1
            if indeg[e.head] == 0:
                heapq.heappush(ready, e.head)
    if len(order) != len(net.nodes):
        stuck = sorted(v for v in net.nodes if indeg[v] > 0)
        raise CycleError(f"cycle detected among nodes {stuck}")
    return tuple(order)


def _fresh(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    i = 2
    while f"{base}_{i}" in taken:
        i += 1
    return f"{base}_{i}"


def promote_key_node(net: Network, node: str, cap: Fraction) -> tuple[Network, str]:
    """Attach a fresh key-only source feeding ``node``.

    Models an intermediate node with private randomness: the new source
    has an empty message (its message coordinate is pinned to zero via
    ``key_only_sources``) and one edge of capacity ``cap`` into ``node``.
    Returns the rewritten network and the new source id.
    """
    if node not in net.nodes:
        raise ValueError(f"unknown node {node!r}")
    if node in net.sources or node in {t.node for t in net.sinks}:
        raise ValueError(f"node {node!r} is a source or sink; only intermediate nodes accept key promotion")
    if cap < 0:
        raise ValueError("key feed capacity must be nonnegative")
    new_src = _fresh(f"key_{node}", set(net.nodes))
    new_edge = _fresh(f"key_{node}_in", {e.id for e in net.edges})
    promoted = Network(
        nodes=net.nodes + (new_src,),
        edges=net.edges + (Edge(new_edge, new_src, node, Fraction(cap)),),
        sources=net.sources + (new_src,),
        sinks=net.sinks,
        wiretap_sets=net.wiretap_sets,
        key_only_sources=net.key_only_sources | {new_src},
    )
    return promoted, new_src
