"""Outer bounds over the constrained entropy cone, and inner certificates."""

from fractions import Fraction

import pytest

from wiretapnet.bounds import (
    BoundQuery,
    closure_table,
    determinism_rules,
    inner_certificate,
    outer_bound,
    outer_bound_sweep,
    quotient_system,
    source_out_capacity,
)
from wiretapnet.codes import evaluate_code, parse_code
from wiretapnet.entropy import GroundSet, network_constraints
from wiretapnet.network import parse_network

from oracles import max_flow
from conftest import FIXTURES

F = Fraction


def load(name):
    return parse_network((FIXTURES / name).read_text())


def test_butterfly_wiretapped_value():
    net = load("butterfly.json")
    res = outer_bound(BoundQuery.make(net, "zero_error"))
    assert res.status == "optimal"
    assert res.value == 1
    # Witness realizes the value and satisfies every original row.
    g = res.ground
    assert res.witness[g.message_mask("s")] == 1


def test_butterfly_open_value_matches_max_flow():
    net = load("butterfly_open.json")
    res = outer_bound(BoundQuery.make(net, "zero_error"))
    assert res.value == 2
    flow = min(max_flow(net, "s", t.node) for t in net.sinks)
    assert flow == 2
    assert res.value <= flow


def test_single_edge_and_parallel_pair():
    assert outer_bound(BoundQuery.make(load("single_edge.json"), "zero_error")).value == 0
    assert outer_bound(BoundQuery.make(load("parallel_pair.json"), "zero_error")).value == 1


def test_asymptotic_at_zero_slack_matches_zero_error():
    for name in ("butterfly.json", "parallel_pair.json", "single_edge.json"):
        net = load(name)
        z = outer_bound(BoundQuery.make(net, "zero_error")).value
        a = outer_bound(BoundQuery.make(net, "asymptotic")).value
        assert z == a, name


def test_asymptotic_slack_buys_rate():
    net = load("single_edge.json")
    res = outer_bound(BoundQuery.make(net, "asymptotic", relax=(F(0), F(1, 4))))
    assert res.value == F(1, 4)
    assert res.relax == (F(0), F(1, 4))


def test_bound_query_validation():
    net = load("butterfly.json")
    with pytest.raises(ValueError):
        BoundQuery.make(net, "simultaneous")
    with pytest.raises(ValueError):
        BoundQuery.make(net, "zero_error", {"ghost": F(1)})
    with pytest.raises(ValueError):
        BoundQuery.make(net, "zero_error", {"s": F(-1)})
    with pytest.raises(ValueError):
        BoundQuery.make(net, "zero_error", relax=(F(0), F(0)))


def test_value_scales_with_weights():
    net = load("butterfly.json")
    one = outer_bound(BoundQuery.make(net, "zero_error", {"s": F(1)})).value
    three = outer_bound(BoundQuery.make(net, "zero_error", {"s": F(3)})).value
    assert three == 3 * one


def test_sweep_matches_single_queries():
    net = load("butterfly.json")
    weight_list = [{"s": F(1)}, {"s": F(2)}, {"s": F(1, 2)}]
    swept = outer_bound_sweep(net, weight_list)
    assert [v for _, v, _ in swept] == [
        outer_bound(BoundQuery.make(net, "zero_error", w)).value for w in weight_list
    ]
    assert [dict(w) for w, _, _ in swept][0] == {"s": F(1)}


def test_closure_table_properties():
    net = load("butterfly.json")
    g = GroundSet.from_network(net)
    rules = determinism_rules(net, decode=True)
    close = closure_table(g.n, rules)
    full = (1 << g.n) - 1
    for m in range(full + 1):
        c = close[m]
        assert c & m == m            # extensive
        assert close[c] == c         # idempotent
    for trig, add in rules:
        covered = close[trig]
        assert covered & add == add  # rules applied at their trigger

    # Source (message,key) determine its out-edges: e1,e2 join m:s,k:s.
    mk = g.message_mask("s") | g.key_mask("s")
    assert close[mk] & g.edge_mask("e1")
    assert close[mk] & g.edge_mask("e2")


def test_quotient_system_shrinks_coordinates():
    net = load("butterfly.json")
    g = GroundSet.from_network(net)
    close = closure_table(g.n, determinism_rules(net, decode=True))
    sys_full = network_constraints(net, (1, 2, 3, 4, 5, 6))
    q = quotient_system(sys_full, close)
    coords = {m for con in q.constraints for m, _ in con.coeffs}
    assert coords <= {close[m] for m in coords}
    # Tautologies (rows collapsing to 0 rel 0) are dropped.
    assert len(q) < len(sys_full)


def test_source_out_capacity():
    assert source_out_capacity(load("butterfly.json")) == 2
    assert source_out_capacity(load("parallel_pair.json")) == 2
    assert source_out_capacity(load("single_edge.json")) == 1


def test_inner_certificate_butterfly_code():
    net = load("butterfly.json")
    code = parse_code((FIXTURES / "butterfly_code.json").read_text())
    ev = evaluate_code(net, code)
    rep = inner_certificate(ev.entropy, net, "zero_error", a=F(1, 2))
    assert rep.ok
    assert rep.rate_of("s") == 1
    assert dict(rep.rate_point) == {"s": F(1)}
    assert rep.family4_slack == ()

    asym = inner_certificate(ev.entropy, net, "asymptotic", a=F(1, 2))
    assert asym.ok
    assert all(s == 0 for _, s in asym.family4_slack)


def test_inner_certificate_rejects_bad_scale():
    net = load("butterfly.json")
    code = parse_code((FIXTURES / "butterfly_code.json").read_text())
    ev = evaluate_code(net, code)
    for a in (F(0), F(3, 2), F(-1)):
        with pytest.raises(ValueError):
            inner_certificate(ev.entropy, net, "zero_error", a=a)


def test_inner_certificate_flags_leaky_code():
    net = load("single_edge.json")
    code = parse_code((FIXTURES / "nokey_code.json").read_text())
    ev = evaluate_code(net, code)
    rep = inner_certificate(ev.entropy, net, "zero_error")
    assert not rep.ok
    fams = dict(rep.memberships)
    assert not fams["family6"].ok
    assert {e.tag for e in fams["family6"].violations} == {"secrecy:e1"}
