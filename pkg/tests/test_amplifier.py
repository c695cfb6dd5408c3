"""Secrecy amplification: sizing, drawn instances, exact evaluation."""

import json
from fractions import Fraction

import pytest

from wiretapnet.amplifier import (
    SizingError,
    WeakCodeFormatError,
    _event_b_prob,
    _le_cells_bound,
    amplify,
    evaluate_amplified,
    leakage_trend_nonincreasing,
    make_weak_code,
    parse_weak_code,
)

from conftest import FIXTURES

F = Fraction


def toy():
    return parse_weak_code((FIXTURES / "weak_toy.json").read_text())


def otp():
    return parse_weak_code((FIXTURES / "weak_otp.json").read_text())


def test_weak_code_measurement():
    weak = toy()
    assert weak.blocklength == 1
    assert weak.msg_size("s") == 4
    assert weak.rate("s") == 2
    assert dict(weak.measured_error)[("s", "t")] == 0
    # I(M;Y) = 1 - h2(3/8) for the 5/8-3/8 tap rows.
    assert dict(weak.measured_leakage)["e"] == pytest.approx(0.045565997075034836)

    perfect = otp()
    assert perfect.declared_eps == 0
    assert dict(perfect.measured_leakage)["e"] == 0


def test_weak_code_format_errors():
    good = json.loads((FIXTURES / "weak_toy.json").read_text())

    def mutated(fn):
        doc = json.loads(json.dumps(good))
        fn(doc)
        return json.dumps(doc)

    cases = [
        lambda d: d.pop("messages"),
        lambda d: d.update(surplus=1),
        lambda d: d["eavesdropper_view"]["e"].pop("alphabet"),
        lambda d: d["messages"].update(s=1),
        lambda d: d.update(blocklength=0),
        lambda d: d.update(declared_eps="-1/10"),
    ]
    for fn in cases:
        with pytest.raises(WeakCodeFormatError):
            parse_weak_code(mutated(fn))
    with pytest.raises(WeakCodeFormatError):
        parse_weak_code("[1]")


def test_declared_budget_is_enforced():
    # The toy tap leaks ~0.0456 bits per use; declaring 1/100 understates
    # it and registration must refuse.
    doc = json.loads((FIXTURES / "weak_toy.json").read_text())
    doc["declared_eps"] = "1/100"
    with pytest.raises(ValueError, match="leak"):
        parse_weak_code(json.dumps(doc))


def test_sizing_table():
    want = {
        2: (F(43, 80), 1, 4),
        4: (F(33, 80), 3, 10),
        8: (F(7, 20), 8, 23),
    }
    for L, (eps3, n3, n2) in want.items():
        amp = amplify(toy(), L, F(1, 8), F(1, 8), eps2=F(1, 4), lam=F(1), seed=1)
        plan = amp.plan("s")
        assert plan.eps3 == eps3
        assert plan.n3 == n3
        assert plan.n2 == n2
        assert plan.o_len == 0
        assert plan.n2 == plan.extractor.n2
        assert amp.inflation_target == L * F(1, 8)


def test_sizing_failure_echoes_formula():
    with pytest.raises(SizingError, match=r"n3 = floor\(\(1 - eps3 - delta2\) \* L\*n\*r\)"):
        amplify(toy(), 1, F(1, 8), F(1, 8), eps2=F(1, 4), lam=F(1), seed=1)
    with pytest.raises(SizingError):
        amplify(toy(), 0, F(1, 8), F(1, 8))
    with pytest.raises(SizingError):
        amplify(toy(), 2, F(0), F(1, 8))
    with pytest.raises(SizingError):
        amplify(toy(), 2, F(1, 8), F(1, 8), lam=F(-1))


def test_inflation_accounting_two_prices():
    # Charged at the requested delta1 the budget fits; charged at the
    # Toeplitz seed actually drawn it does not. Both facts are reported.
    amp = amplify(toy(), 4, F(1, 100), F(1, 8), eps2=F(1, 4), lam=F(1), seed=1)
    assert amp.extra_uses_budget == F(8, 71)
    assert amp.extra_uses_actual == F(1000, 71)
    assert amp.inflation_target == F(1, 2)
    assert amp.within_budget and not amp.within_actual


def test_amplified_leakage_trend():
    reports = []
    for L in (2, 4, 8):
        amp = amplify(toy(), L, F(1, 8), F(1, 8), eps2=F(1, 4), lam=F(1), seed=1)
        reports.append(evaluate_amplified(amp))
    leaks = [rep.leakage_of("e") for rep in reports]
    assert leaks[0] == pytest.approx(0.045565997075034836)
    assert leaks[1] == pytest.approx(0.0028196011057364245)
    assert leaks[2] == pytest.approx(1.1006917649325487e-05)
    # Certified comparison on the underlying rational log-terms.
    assert leakage_trend_nonincreasing(reports, "e")
    assert not leakage_trend_nonincreasing(list(reversed(reports)), "e")

    for rep in reports:
        assert dict(rep.dtv)["s"] == 0
        assert dict(rep.coupling_error)["s"] == 0
        assert dict(rep.sw_failure)[("s", "t")] == 0
        assert dict(rep.error_bound)[("s", "t")] == 0
        (pk,) = rep.pinsker
        assert pk.holds is True
        assert rep.event_b_bound_holds


def test_event_b_exact_probability():
    # Two equal cells, two draws, half-width windows pin counts to (1,1).
    assert _event_b_prob([F(1, 2), F(1, 2)], 2, F(1, 2)) == F(1, 2)
    # Single cell: the window always contains L.
    assert _event_b_prob([F(1)], 3, F(1, 4)) == 1
    # Skewed cells: only the (3,1) composition fits both windows.
    assert _event_b_prob([F(3, 4), F(1, 4)], 4, F(1, 3)) == F(27, 64)
    # Unattainable window.
    assert _event_b_prob([F(1, 2), F(1, 2)], 1, F(1, 4)) == 0


def test_event_b_cells_bound():
    assert _le_cells_bound(F(1, 2), 4, F(3)) is True
    assert _le_cells_bound(F(1, 2), 1, F(3)) is False
    assert _le_cells_bound(F(1, 4), 1, F(5, 2)) is True
    assert _le_cells_bound(F(0), 1, F(100)) is True


def test_toy_event_b_is_vacuous_at_small_l():
    # The toy tap windows are unattainable at these L, so failure is
    # certain; the union bound 2*cells*2^-gamma*L exceeds 1 and holds.
    amp = amplify(toy(), 2, F(1, 8), F(1, 8), eps2=F(1, 4), lam=F(1), seed=1)
    rep = evaluate_amplified(amp)
    (eb,) = rep.event_b
    assert eb.p_fail == 1
    assert eb.holds
    assert rep.event_b_union == 1


def test_seed_average_mode():
    amp = amplify(toy(), 2, F(1, 8), F(1, 8), eps2=F(1, 4), lam=F(1), seed=1)
    rep = evaluate_amplified(amp, seed_mode="average")
    assert rep.seed_mode == "average"
    assert rep.leakage_of("e") == pytest.approx(0.06555237359775212)
    assert dict(rep.dtv)["s"] == F(1, 32)


def test_otp_amplifies_to_exact_zero():
    amp = amplify(otp(), 1, F(1, 8), F(1, 16), eps2=F(1, 8), lam=F(1, 2), seed=0)
    plan = amp.plan("s")
    assert plan.eps3 == F(3, 8)
    assert (plan.n3, plan.n2) == (1, 2)
    rep = evaluate_amplified(amp)
    assert rep.leakage_of("e") == F(0)
    assert dict(rep.dtv)["s"] == F(0)


def test_montecarlo_deterministic_with_ci():
    amp = amplify(toy(), 4, F(1, 8), F(1, 8), eps2=F(1, 4), lam=F(1), seed=1)
    a = evaluate_amplified(amp, mode="montecarlo", trials=2000, seed=42)
    b = evaluate_amplified(amp, mode="montecarlo", trials=2000, seed=42)
    assert a == b
    assert a.leakage_of("e") == pytest.approx(0.0034831776711799906)
    assert dict(a.dtv)["s"] == F(1, 40)
    (tap, (lo, hi)), = a.leakage_ci
    assert tap == "e" and lo <= hi
    assert any("plug-in leakage is biased upward" in note for note in a.notes)
    with pytest.raises(ValueError):
        evaluate_amplified(amp, mode="montecarlo", trials=2000)
    with pytest.raises(ValueError):
        evaluate_amplified(amp, mode="montecarlo", trials=0, seed=1)


def test_make_weak_code_direct():
    weak = make_weak_code(
        blocklength=1,
        msg_sizes={"s": 2},
        legit_view={"s": {"t": [[F(1), F(0)], [F(0), F(1)]]}},
        tap_view={"e": (2, [[F(1, 2), F(1, 2)], [F(1, 2), F(1, 2)]])},
        declared_eps=F(0),
    )
    assert dict(weak.measured_error)[("s", "t")] == 0
    assert dict(weak.measured_leakage)["e"] == 0
    with pytest.raises(WeakCodeFormatError):
        make_weak_code(1, {}, {}, {}, F(0))
    with pytest.raises(WeakCodeFormatError):
        make_weak_code(1, {"s": 2}, {"ghost": {}}, {}, F(0))
