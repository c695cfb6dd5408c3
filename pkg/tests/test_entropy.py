"""Entropy vectors, elemental inequalities, and network constraint families."""

import random
from fractions import Fraction
from itertools import combinations, product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wiretapnet import entropy as ent
from wiretapnet.entropy import (
    GroundSet,
    SizeCapError,
    check_membership,
    elemental_inequalities,
    entropy_vector_of_pmf,
    max_ground_size,
    network_constraints,
    num_elemental_inequalities,
    serialize_constraints,
)
from wiretapnet.network import parse_network, promote_key_node

from conftest import FIXTURES


def butterfly():
    return parse_network((FIXTURES / "butterfly.json").read_text())


def random_dyadic_pmf(rng, n_vars, alphabet=2):
    """Random joint pmf whose masses are k/64; marginals stay dyadic-free
    in general but entropies are evaluated exactly only when possible."""
    outcomes = list(product(range(alphabet), repeat=n_vars))
    weights = [rng.randrange(0, 4) for _ in outcomes]
    while sum(weights) == 0:
        weights = [rng.randrange(0, 4) for _ in outcomes]
    total = sum(weights)
    return {o: Fraction(w, total) for o, w in zip(outcomes, weights) if w}


def test_elemental_counts():
    assert num_elemental_inequalities(3) == 9
    assert num_elemental_inequalities(4) == 28
    for n in range(1, 6):
        assert len(elemental_inequalities(n)) == num_elemental_inequalities(n)


def test_elemental_rows_are_homogeneous():
    for con in elemental_inequalities(4).constraints:
        assert con.rel == ">="
        assert con.rhs == 0
        assert con.tag.startswith("elemental:")


def test_ground_size_cap(monkeypatch):
    monkeypatch.setenv("WIRETAP_MAX_N", "4")
    assert max_ground_size() == 4
    with pytest.raises(SizeCapError):
        elemental_inequalities(5)
    monkeypatch.setenv("WIRETAP_MAX_N", "zap")
    with pytest.raises(ValueError):
        max_ground_size()
    monkeypatch.setenv("WIRETAP_MAX_N", "0")
    with pytest.raises(ValueError):
        max_ground_size()
    monkeypatch.delenv("WIRETAP_MAX_N")
    assert max_ground_size() == 12


def test_random_pmfs_satisfy_shannon_cone():
    rng = random.Random(7)
    for n_vars in (2, 3, 4):
        system = elemental_inequalities(n_vars)
        ground = GroundSet(tuple(f"x{i}" for i in range(n_vars)))
        for _ in range(40):
            pmf = random_dyadic_pmf(rng, n_vars)
            h = entropy_vector_of_pmf(pmf, ground)
            report = check_membership(h, system)
            assert report.ok, report.violations


def test_exact_vector_on_dyadic_pmf():
    # Joint masses are dyadic but the x-marginal is (3/4, 1/4), so the
    # whole vector downgrades to floats; exact means every mask worked.
    ground = GroundSet(("x", "y"))
    pmf = {(0, 0): Fraction(1, 2), (0, 1): Fraction(1, 4), (1, 0): Fraction(1, 4)}
    h = entropy_vector_of_pmf(pmf, ground)
    assert not h.exact
    assert h.h_of(["x"]) == pytest.approx(0.8112781244591328)
    assert h.h_of(["x", "y"]) == pytest.approx(1.5)


def test_exact_flag_semantics():
    ground = GroundSet(("x", "y"))
    uniform = {(a, b): Fraction(1, 4) for a in range(2) for b in range(2)}
    h = entropy_vector_of_pmf(uniform, ground)
    assert h.exact
    assert h.h_of(["x"]) == 1
    assert h.h_of(["x", "y"]) == 2

    skew = {(0, 0): Fraction(3, 4), (1, 1): Fraction(1, 4)}
    h2 = entropy_vector_of_pmf(skew, ground)
    assert not h2.exact
    assert h2.h_of(["x"]) == pytest.approx(0.8112781244591328)
    with pytest.raises(ValueError):
        entropy_vector_of_pmf(skew, ground, mode="exact")


def test_entropy_vector_input_validation():
    ground = GroundSet(("x", "y"))
    with pytest.raises(ValueError):
        entropy_vector_of_pmf({(0,): Fraction(1)}, ground)
    with pytest.raises(ValueError):
        entropy_vector_of_pmf({(0, 0): Fraction(1, 2)}, ground)
    with pytest.raises(ValueError):
        entropy_vector_of_pmf({(0, 0): Fraction(3, 2), (1, 1): Fraction(-1, 2)}, ground)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=8), min_size=8, max_size=8).filter(lambda w: sum(w) > 0))
def test_submodularity_three_vars(weights):
    total = sum(weights)
    outcomes = list(product(range(2), repeat=3))
    pmf = {o: Fraction(w, total) for o, w in zip(outcomes, weights) if w}
    ground = GroundSet(("a", "b", "c"))
    h = entropy_vector_of_pmf(pmf, ground)
    full = 1 << 3
    for m1 in range(1, full):
        for m2 in range(1, full):
            lhs = h.h(m1) + h.h(m2)
            rhs = (h.h(m1 | m2) if m1 | m2 else 0) + (h.h(m1 & m2) if m1 & m2 else 0)
            assert float(lhs) - float(rhs) >= -1e-9


def test_ground_from_network_labels():
    g = GroundSet.from_network(butterfly())
    assert g.labels[:2] == ("m:s", "k:s")
    assert g.labels[2:] == tuple(f"e:e{i}" for i in range(1, 10))
    assert g.describe(g.message_mask("s") | g.edge_mask("e5")) == "{m:s,e:e5}"
    assert g.mask_of(["m:s", "e:e1"]) == g.message_mask("s") | g.edge_mask("e1")


def test_network_constraint_families():
    net = butterfly()
    g = GroundSet.from_network(net)
    zero = network_constraints(net, (1, 2, 3, 4, 5, 6))
    assert zero.n == g.n
    tags = [c.tag for c in zero.constraints]
    for fam in ("independence", "source-coding", "relay-coding", "decode", "cap", "secrecy"):
        assert any(t.startswith(fam) for t in tags), fam

    caps = {c.tag: c for c in zero.constraints if c.tag.startswith("cap:")}
    assert set(caps) == {f"cap:e{i}" for i in range(1, 10)}
    for con in caps.values():
        assert con.rel == "<=" and con.rhs == 1

    with pytest.raises(ValueError):
        network_constraints(net, (1, 7))


def test_relaxed_families_change_relation():
    net = butterfly()
    eps = (Fraction(1, 8), Fraction(1, 16))
    strict = network_constraints(net, (4, 6))
    relaxed = network_constraints(net, (4, 6), relax=eps)
    assert all(c.rel == "=" for c in strict.constraints)
    assert all(c.rel == "<=" for c in relaxed.constraints)
    stripped = {c.tag.removesuffix(":relaxed") for c in relaxed.constraints}
    assert {c.tag for c in strict.constraints} == stripped
    assert any(c.rhs == Fraction(1, 8) for c in relaxed.constraints)
    assert any(c.rhs == Fraction(1, 16) for c in relaxed.constraints)


def test_key_only_source_is_pinned():
    net, src = promote_key_node(butterfly(), "c", Fraction(1))
    g = GroundSet.from_network(net)
    sys_ = network_constraints(net, (1,))
    pins = [c for c in sys_.constraints if c.rel == "=" and c.rhs == 0
            and c.coeffs == ((g.message_mask(src), Fraction(1)),)]
    assert len(pins) == 1


def test_serialize_constraints_golden():
    text = serialize_constraints(elemental_inequalities(2))
    assert text == (
        "# ground-size 2\n"
        "-1·h{2} +1·h{3} >= 0 # elemental:H(0|rest)\n"
        "-1·h{1} +1·h{3} >= 0 # elemental:H(1|rest)\n"
        "+1·h{1} +1·h{2} -1·h{3} >= 0 # elemental:I(0;1|0)\n"
    )
    # Determinism across calls.
    net = butterfly()
    a = serialize_constraints(network_constraints(net, (1, 2, 3, 4, 5, 6)))
    b = serialize_constraints(network_constraints(net, (1, 2, 3, 4, 5, 6)))
    assert a == b


def test_membership_report_flags_violations():
    system = elemental_inequalities(2)
    ground = GroundSet(("x", "y"))
    uniform = {(a, b): Fraction(1, 4) for a in range(2) for b in range(2)}
    h = entropy_vector_of_pmf(uniform, ground)
    good = check_membership(h, system)
    assert good.ok and not good.violations

    # Corrupt the joint entropy below a marginal: monotonicity must fail.
    bad = ent.EntropyVector(ground, (Fraction(1), Fraction(1), Fraction(1, 2)), True)
    report = check_membership(bad, system)
    assert not report.ok
    assert {e.tag for e in report.violations} == {"elemental:H(0|rest)", "elemental:H(1|rest)"}
    assert all(e.slack < 0 for e in report.violations)
