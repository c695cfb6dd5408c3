"""Capacity bounds: LP outer bounds and code-derived inner certificates.

The outer bound maximizes a nonnegative weighting of source message
entropies over the Shannon cone intersected with the network constraint
families.  The true region uses the entropic cone, which has no finite
description, so everything here is computed over its Shannon relaxation:
values are honest upper bounds and every report should be read with the
"shannon" relaxation tag the CLI stamps on it.

Before solving, coordinates are folded together along functional
dependencies: edge variables are functions of their tail's inputs
(families 2 and 3), and decoded messages are functions of sink inputs
(family 4 when it is an equality), so on the feasible region
h(A) = h(closure(A)).  Identifying each subset with its closure shrinks
the LP by an order of magnitude without changing its value.  The lemma
is also re-checked at runtime: the witness that comes back is expanded
through the closure table and re-verified against every original row in
exact arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal, Mapping, Sequence

from . import lp
from .entropy import (
    ConstraintSystem,
    EntropyVector,
    GroundSet,
    LinearConstraint,
    MembershipReport,
    check_membership,
    elemental_inequalities,
    network_constraints,
)
from .network import Network, validate

Mode = Literal["zero_error", "asymptotic"]

_MODES = ("zero_error", "asymptotic")


@dataclass(frozen=True)
class BoundQuery:
    """One outer-bound computation: network, mode, objective weights.

    ``weights`` assigns a nonnegative rational to each source; the LP
    maximizes the weighted sum of source message entropies.  ``relax``
    holds the (decode, secrecy) slack allowances used by the asymptotic
    mode; both default to zero, the limit the asymptotic region is
    defined by.
    """

    net: Network
    mode: Mode
    weights: tuple[tuple[str, Fraction], ...]
    relax: tuple[Fraction, Fraction] | None = None

    @classmethod
    def make(
        cls,
        net: Network,
        mode: Mode,
        weights: Mapping[str, Fraction] | None = None,
        relax: tuple[Fraction, Fraction] | None = None,
    ) -> "BoundQuery":
        if mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
        if weights is None:
            weights = {s: Fraction(1) for s in net.sources}
        w = []
        for s in sorted(weights):
            if s not in net.sources:
                raise ValueError(f"weight names unknown source {s!r}")
            q = Fraction(weights[s])
            if q < 0:
                raise ValueError(f"weight for {s!r} is negative")
            w.append((s, q))
        if relax is not None:
            if mode != "asymptotic":
                raise ValueError("relax slacks only apply to asymptotic mode")
            e4, e6 = Fraction(relax[0]), Fraction(relax[1])
            if e4 < 0 or e6 < 0:
                raise ValueError("relax slacks must be nonnegative")
            relax = (e4, e6)
        return cls(net, mode, tuple(w), relax)


@dataclass(frozen=True)
class OuterBoundResult:
    """Exact outer-bound value plus the certificates behind it.

    ``witness`` lives in the original subset coordinates (expanded from
    the quotient solve and re-verified row by row).  ``lp_result`` keeps
    the raw solver output, whose dual refers to the quotient system in
    ``quotient_system``.
    """

    status: str
    value: Fraction | None
    witness: dict[int, Fraction] | None
    ground: GroundSet
    mode: Mode
    relax: tuple[Fraction, Fraction] | None
    lp_result: lp.LpResult
    quotient_system: ConstraintSystem
    closure: tuple[int, ...]
    relaxation: str = "shannon"


def _require_valid(net: Network) -> None:
    report = validate(net)
    if not report.ok:
        msgs = "; ".join(f"{rule}: {detail}" for rule, detail in report.violations)
        raise ValueError(f"network fails validation: {msgs}")


def source_out_capacity(net: Network) -> Fraction:
    """Total capacity leaving all sources (the budget relaxed decoding
    and secrecy slacks are usually measured against)."""
    total = Fraction(0)
    for s in net.sources:
        for e in net.out_edges(s):
            total += e.cap
    return total


# ---------------------------------------------------------------------------
# closure of subsets under functional dependencies


def determinism_rules(net: Network, decode: bool) -> tuple[tuple[int, int], ...]:
    """(premise mask, implied mask) pairs: premise determines the rest.

    Sources determine their out-edges from (message, key); relays
    determine out-edges from in-edges; with ``decode`` each sink's
    inputs determine its demanded messages.
    """
    g = GroundSet.from_network(net)
    rules: list[tuple[int, int]] = []
    for s in sorted(net.sources):
        outs = net.out_edges(s)
        if outs:
            add = 0
            for e in outs:
                add |= g.edge_mask(e.id)
            rules.append((g.message_mask(s) | g.key_mask(s), add))
    for v in net.intermediate_nodes:
        outs = net.out_edges(v)
        if not outs:
            continue
        prem = 0
        for e in net.in_edges(v):
            prem |= g.edge_mask(e.id)
        add = 0
        for e in outs:
            add |= g.edge_mask(e.id)
        rules.append((prem, add))
    if decode:
        for t in net.sinks:
            if not t.beta:
                continue
            prem = 0
            for e in net.in_edges(t.node):
                prem |= g.edge_mask(e.id)
            add = 0
            for s in t.beta:
                add |= g.message_mask(s)
            rules.append((prem, add))
    return tuple(rules)


def closure_table(n: int, rules: Sequence[tuple[int, int]]) -> tuple[int, ...]:
    """close[mask] for every mask in [0, 2^n): smallest superset closed
    under every (premise -> implied) rule."""
    close = [0] * (1 << n)
    for mask in range(1, 1 << n):
        cur = mask
        changed = True
        while changed:
            changed = False
            for prem, add in rules:
                if cur & prem == prem and cur | add != cur:
                    cur |= add
                    changed = True
        close[mask] = cur
    return tuple(close)


def quotient_system(system: ConstraintSystem, close: Sequence[int]) -> ConstraintSystem:
    """Rewrite every row over closure representatives and deduplicate.

    Sound for systems that imply h(A) = h(close(A)): each original row
    and its image agree on the feasible region, so the quotient has the
    same optimum.  Rows whose terms cancel entirely must be trivially
    true; a network system can only produce tautologies there.
    """
    seen: set = set()
    out: list[LinearConstraint] = []
    for con in system.constraints:
        acc: dict[int, Fraction] = {}
        for m, c in con.coeffs:
            cm = close[m]
            acc[cm] = acc.get(cm, Fraction(0)) + c
        items = tuple(sorted((m, c) for m, c in acc.items() if c != 0))
        if not items:
            ok = con.rhs == 0 if con.rel == "=" else (
                con.rhs >= 0 if con.rel == "<=" else con.rhs <= 0)
            if not ok:
                raise ValueError(f"row {con.tag!r} collapses to a false constant")
            continue
        key = (items, con.rel, con.rhs)
        if key not in seen:
            seen.add(key)
            out.append(LinearConstraint(items, con.rel, con.rhs, con.tag))
    return ConstraintSystem(system.n, tuple(out))


# ---------------------------------------------------------------------------
# outer bound


def _outer_parts(q: BoundQuery):
    """(quotient system, #network rows, closure table, full system)."""
    net = q.net
    g = GroundSet.from_network(net)
    if q.mode == "zero_error":
        netrows = network_constraints(net, (1, 2, 3, 4, 5, 6))
        relax = None
    else:
        relax = q.relax if q.relax is not None else (Fraction(0), Fraction(0))
        netrows = network_constraints(net, (1, 2, 3, 4, 5, 6), relax=relax)
    # family 4 closure needs the decode relation to be an equality, which
    # holds in zero-error mode and at zero relaxed slack
    decode = q.mode == "zero_error" or relax[0] == 0
    close = closure_table(g.n, determinism_rules(net, decode=decode))
    full = netrows + elemental_inequalities(g.n)
    qsys = quotient_system(full, close)
    return qsys, len(netrows), close, full


def _expand_witness(witness: Mapping[int, Fraction], close: Sequence[int], n: int) -> dict[int, Fraction]:
    out = {}
    for mask in range(1, 1 << n):
        v = witness.get(close[mask], Fraction(0))
        if v != 0:
            out[mask] = v
    return out


def outer_bound(q: BoundQuery, max_pivots: int = 2_000_000) -> OuterBoundResult:
    """Maximize the weighted source-entropy sum over the outer region.

    Zero-error mode enforces constraint families 1-6 as stated;
    asymptotic mode relaxes decoding (4) and secrecy (6) to one-sided
    slacks.  The value is exact; the witness returned is feasible for
    every original constraint row (checked here, not assumed).
    """
    _require_valid(q.net)
    g = GroundSet.from_network(q.net)
    qsys, n_net, close, full = _outer_parts(q)
    objective: dict[int, Fraction] = {}
    for s, w in q.weights:
        if w == 0:
            continue
        cm = close[g.message_mask(s)]
        objective[cm] = objective.get(cm, Fraction(0)) + w
    problem = lp.LpProblem.make(qsys, objective, nonneg=True)
    res = lp.solve_cutting(problem, initial_rows=range(n_net), max_pivots=max_pivots)
    witness = None
    if res.witness is not None and res.status == lp.OPTIMAL:
        witness = _expand_witness(res.witness, close, g.n)
        bad = [con.tag for con in full.constraints if not _row_holds(con, witness)]
        if bad:
            raise lp.CertificateError(
                f"expanded witness violates original rows: {bad[:5]}")
    return OuterBoundResult(
        status=res.status,
        value=res.value,
        witness=witness,
        ground=g,
        mode=q.mode,
        relax=q.relax if q.mode == "asymptotic" else None,
        lp_result=res,
        quotient_system=qsys,
        closure=close,
    )


def _row_holds(con: LinearConstraint, x: Mapping[int, Fraction]) -> bool:
    lhs = sum((c * x.get(m, Fraction(0)) for m, c in con.coeffs), Fraction(0))
    if con.rel == "=":
        return lhs == con.rhs
    if con.rel == "<=":
        return lhs <= con.rhs
    return lhs >= con.rhs


def outer_bound_sweep(
    net: Network,
    weight_list: Iterable[Mapping[str, Fraction]],
    mode: Mode = "zero_error",
    relax: tuple[Fraction, Fraction] | None = None,
) -> list[tuple[dict[str, Fraction], Fraction | None, dict[int, Fraction] | None]]:
    """outer_bound per weight vector, rebuilding the system only once.

    Support-function sampling: the region is down-closed, so its values
    on nonnegative weightings characterize it.  Returns (weights, value,
    witness) triples in input order.
    """
    out = []
    cached = None
    for weights in weight_list:
        q = BoundQuery.make(net, mode, weights, relax)
        if cached is None:
            _require_valid(net)
            cached = _outer_parts(q)
        qsys, n_net, close, full = cached
        g = GroundSet.from_network(net)
        objective: dict[int, Fraction] = {}
        for s, w in q.weights:
            if w == 0:
                continue
            cm = close[g.message_mask(s)]
            objective[cm] = objective.get(cm, Fraction(0)) + w
        problem = lp.LpProblem.make(qsys, objective, nonneg=True)
        res = lp.solve_cutting(problem, initial_rows=range(n_net))
        witness = None
        if res.witness is not None and res.status == lp.OPTIMAL:
            witness = _expand_witness(res.witness, close, g.n)
        out.append((dict(q.weights), res.value, witness))
    return out


# ---------------------------------------------------------------------------
# inner certificates


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of checking a code's entropy vector against the inner
    achievability conditions at scale ``a``.

    ``memberships`` maps a family label to its membership report;
    ``family4_slack`` carries per-sink decode deficits in asymptotic
    mode, where they are data rather than pass/fail conditions.
    """

    mode: Mode
    a: Fraction
    rate_point: tuple[tuple[str, Fraction], ...]
    memberships: tuple[tuple[str, MembershipReport], ...]
    family4_slack: tuple[tuple[str, "Fraction | float"], ...]
    ok: bool

    def rate_of(self, source: str) -> Fraction:
        for s, r in self.rate_point:
            if s == source:
                return r
        raise KeyError(source)


def _capacity_rows(net: Network, g: GroundSet, a: Fraction) -> ConstraintSystem:
    rows = [
        LinearConstraint.make({g.edge_mask(e): a}, "<=", net.edge(e).cap, f"cap:{e}:x{a}")
        for e in sorted(x.id for x in net.edges)
    ]
    return ConstraintSystem(g.n, tuple(rows))


def inner_certificate(
    h: EntropyVector,
    net: Network,
    mode: Mode = "zero_error",
    a: Fraction = Fraction(1),
) -> CertificateReport:
    """Check an entropy vector as an achievability certificate.

    The vector must come from a genuine joint distribution (the code
    evaluator produces such vectors); this function checks the network
    families on it and the scaled capacity fit a*h_e <= c_e, and prices
    the rate point a*h(m_s) per source.  Zero-error mode requires the
    decode family; asymptotic mode reports its slack informationally.
    """
    _require_valid(net)
    a = Fraction(a)
    if not 0 < a <= 1:
        raise ValueError("scale a must lie in (0, 1]")
    g = GroundSet.from_network(net)
    if h.ground.labels != g.labels:
        raise ValueError("entropy vector ground set does not match network")
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")

    required = (1, 2, 3, 4, 6) if mode == "zero_error" else (1, 2, 3, 6)
    memberships: list[tuple[str, MembershipReport]] = []
    ok = True
    for fam in required:
        rep = check_membership(h, network_constraints(net, (fam,)))
        memberships.append((f"family{fam}", rep))
        ok = ok and rep.ok
    cap_rep = check_membership(h, _capacity_rows(net, g, a))
    memberships.append(("capacity", cap_rep))
    ok = ok and cap_rep.ok

    slack: list[tuple[str, Fraction]] = []
    if mode == "asymptotic":
        for con in network_constraints(net, (4,)).constraints:
            slack.append((con.tag, con.evaluate(h.h)))

    rate = tuple((s, a * h.h(g.message_mask(s))) for s in sorted(net.sources))
    return CertificateReport(
        mode=mode,
        a=a,
        rate_point=rate,
        memberships=tuple(memberships),
        family4_slack=tuple(slack),
        ok=ok,
    )
