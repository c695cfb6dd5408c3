"""Network parsing, validation, and graph helpers."""

import json
from fractions import Fraction

import pytest

from wiretapnet.network import (
    CycleError,
    NetworkFormatError,
    parse_network,
    promote_key_node,
    serialize_network,
    topological_order,
    validate,
)

from conftest import FIXTURES


def load(name):
    return parse_network((FIXTURES / name).read_text())


def test_butterfly_shape():
    net = load("butterfly.json")
    assert len(net.edges) == 9
    assert net.sources == ("s",)
    assert {t.node for t in net.sinks} == {"t1", "t2"}
    assert len(net.wiretap_sets) == 9
    assert all(len(a) == 1 for a in net.wiretap_sets)
    assert net.edge("e5").cap == 1
    with pytest.raises(KeyError):
        net.edge("e99")


def test_serialize_round_trip():
    for name in ("butterfly.json", "parallel_pair.json", "single_edge.json"):
        net = load(name)
        again = parse_network(serialize_network(net))
        assert again == net


def test_parse_rejects_malformed_documents():
    good = json.loads((FIXTURES / "butterfly.json").read_text())

    def mutated(fn):
        doc = json.loads(json.dumps(good))
        fn(doc)
        return json.dumps(doc)

    cases = [
        lambda d: d.pop("nodes"),
        lambda d: d["edges"].append(d["edges"][0]),  # duplicate edge id
        lambda d: d["edges"][0].update(tail="ghost"),
        lambda d: d["edges"][0].update(cap="1/0"),
        lambda d: d["sources"].append("ghost"),
        lambda d: d["sinks"][0].update(beta=["ghost"]),  # demand unknown node
        lambda d: d["wiretap_sets"].append(["e1", "e1"]),
        lambda d: d["wiretap_sets"].append(["ghost"]),
        lambda d: d.update(surprise=1),
    ]
    for fn in cases:
        with pytest.raises(NetworkFormatError):
            parse_network(mutated(fn))
    with pytest.raises(NetworkFormatError):
        parse_network("not json")
    with pytest.raises(NetworkFormatError):
        parse_network("[]")


def test_validate_flags_structural_problems():
    doc = {
        "nodes": ["a", "b", "c"],
        "edges": [
            {"id": "e1", "tail": "a", "head": "b", "cap": "1"},
            {"id": "e2", "tail": "b", "head": "c", "cap": "1"},
            {"id": "e3", "tail": "c", "head": "b", "cap": "1"},
        ],
        "sources": ["a"],
        "sinks": [{"node": "c", "beta": ["a"]}],
        "wiretap_sets": [["e1"]],
    }
    report = validate(parse_network(json.dumps(doc)))
    assert not report.ok
    assert {rule for rule, _ in report.violations} == {"cycle", "sink-has-outputs"}

    for name in ("butterfly.json", "parallel_pair.json", "single_edge.json"):
        assert validate(load(name)).ok


def test_topological_order():
    net = load("butterfly.json")
    order = topological_order(net)
    assert set(order) == set(net.nodes)
    pos = {v: i for i, v in enumerate(order)}
    for e in net.edges:
        assert pos[e.tail] < pos[e.head]
    # Deterministic tie-break: lexicographically least ready node first.
    assert order[0] == min(net.sources)

    cyc = {
        "nodes": ["a", "b"],
        "edges": [
            {"id": "e1", "tail": "a", "head": "b", "cap": "1"},
            {"id": "e2", "tail": "b", "head": "a", "cap": "1"},
        ],
        "sources": [],
        "sinks": [],
        "wiretap_sets": [],
    }
    with pytest.raises(CycleError):
        topological_order(parse_network(json.dumps(cyc)))


def test_promote_key_node():
    net = load("butterfly.json")
    promoted, src = promote_key_node(net, "c", Fraction(1, 2))
    assert src == "key_c"
    assert src in promoted.sources
    assert src in promoted.key_only_sources
    new = [e for e in promoted.edges if e.tail == src]
    assert len(new) == 1 and new[0].head == "c" and new[0].cap == Fraction(1, 2)
    assert validate(promoted).ok
    # Original untouched, demands unchanged.
    assert len(net.sources) == 1
    assert promoted.sinks == net.sinks

    with pytest.raises(ValueError):
        promote_key_node(net, "s", Fraction(1))
    with pytest.raises(ValueError):
        promote_key_node(net, "ghost", Fraction(1))
    with pytest.raises(ValueError):
        promote_key_node(net, "c", Fraction(-1))


def test_promote_key_node_fresh_ids():
    net = load("butterfly.json")
    once, a = promote_key_node(net, "c", Fraction(1))
    twice, b = promote_key_node(once, "c", Fraction(1))
    assert a != b
    assert validate(twice).ok
    assert len({e.id for e in twice.edges}) == len(twice.edges)
