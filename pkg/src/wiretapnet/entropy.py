"""Entropy vectors, elemental inequalities and network constraint families.

Coordinates are indexed by nonempty subsets of a ground set of jointly
distributed variables, encoded as bitmasks: bit i of a mask selects
ground label i.  h{mask} is the joint entropy (bits) of the selected
variables; the empty set is identically zero and never stored.

For a network the ground set is, in order: one message label per source
(sources sorted by id), then one key label per source (same order), then
one label per edge (edges sorted by id).  This ordering is part of the
serialization contract.

The elemental inequalities are the minimal generating set of the
polymatroidal cone: n conditional entropies H(X_i | rest) >= 0 plus
C(n,2) * 2^(n-2) conditional mutual informations I(X_i; X_j | X_K) >= 0.
Every inequality derivable from positivity of Shannon information
measures is a nonnegative combination of these rows.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .network import Network
from .rationals import dyadic_log2, format_rational

DEFAULT_MAX_GROUND = 12

Rel = str  # "=", "<=", ">="


class SizeCapError(ValueError):
    """Instance exceeds the configured exponential-blowup guard."""


class ConstraintDomainError(ValueError):
    """Network shape outside the constraint builder's domain."""


def max_ground_size() -> int:
    """Ground-size cap; override with the WIRETAP_MAX_N environment variable."""
    raw = os.environ.get("WIRETAP_MAX_N")
    if raw is None:
        return DEFAULT_MAX_GROUND
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"WIRETAP_MAX_N must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError("WIRETAP_MAX_N must be positive")
    return value


@dataclass(frozen=True)
class GroundSet:
    """Ordered ground labels; bit i of every mask refers to labels[i]."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate ground labels")

    @classmethod
    def from_network(cls, net: Network) -> "GroundSet":
        srcs = sorted(net.sources)
        eids = sorted(e.id for e in net.edges)
        labels = [f"m:{s}" for s in srcs] + [f"k:{s}" for s in srcs] + [f"e:{e}" for e in eids]
        return cls(tuple(labels))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def full_mask(self) -> int:
        return (1 << len(self.labels)) - 1

    def bit(self, label: str) -> int:
        return self.labels.index(label)

    def mask_of(self, labels: Iterable[str]) -> int:
        mask = 0
        for lab in labels:
            mask |= 1 << self.bit(lab)
        return mask

    def message_mask(self, source: str) -> int:
        return 1 << self.bit(f"m:{source}")

    def key_mask(self, source: str) -> int:
        return 1 << self.bit(f"k:{source}")

    def edge_mask(self, edge_id: str) -> int:
        return 1 << self.bit(f"e:{edge_id}")

    def describe(self, mask: int) -> str:
        return "{" + ",".join(self.labels[i] for i in range(self.n) if mask >> i & 1) + "}"


@dataclass(frozen=True)
class LinearConstraint:
    """sum(coeffs[mask] * h[mask]) REL rhs, with provenance tag."""

    coeffs: tuple[tuple[int, Fraction], ...]  # (mask, coeff), masks ascending
    rel: Rel
    rhs: Fraction
    tag: str

    @classmethod
    def make(cls, raw: Mapping[int, Fraction], rel: Rel, rhs: Fraction, tag: str = "") -> "LinearConstraint":
        if rel not in ("=", "<=", ">="):
            raise ValueError(f"bad relation {rel!r}")
        items = tuple(sorted((m, Fraction(c)) for m, c in raw.items() if m != 0 and c != 0))
        return cls(items, rel, Fraction(rhs), tag)

    def evaluate(self, lookup) -> Fraction | float:
        return sum((c * lookup(m) for m, c in self.coeffs), Fraction(0))


@dataclass(frozen=True)
class ConstraintSystem:
    n: int
    constraints: tuple[LinearConstraint, ...]

    def __add__(self, other: "ConstraintSystem") -> "ConstraintSystem":
        if self.n != other.n:
            raise ValueError("ground sizes differ")
        return ConstraintSystem(self.n, self.constraints + other.constraints)

    def __len__(self) -> int:
        return len(self.constraints)


def _accumulate(coeffs: dict[int, Fraction], mask: int, c: int) -> None:
    if mask == 0:
        return
    coeffs[mask] = coeffs.get(mask, Fraction(0)) + c


def num_elemental_inequalities(n: int) -> int:
    if n == 1:
        return 1
    return n + math.comb(n, 2) * 2 ** (n - 2)


def elemental_inequalities(n: int) -> ConstraintSystem:
    """The generating inequalities of the Shannon cone on n variables.

    Rows come out in a fixed order: the n conditional entropies (by
    variable index), then I(X_i;X_j|X_K) for i<j with K running over
    subsets of the complement in ascending mask order.
    """
    if n < 1:
        raise ValueError("need at least one variable")
    cap = max_ground_size()
    if n > cap:
        raise SizeCapError(f"ground size {n} exceeds cap {cap} (set WIRETAP_MAX_N to override)")
    full = (1 << n) - 1
    rows: list[LinearConstraint] = []
    for i in range(n):
        coeffs: dict[int, Fraction] = {}
        _accumulate(coeffs, full, 1)
        _accumulate(coeffs, full ^ (1 << i), -1)
        rows.append(LinearConstraint.make(coeffs, ">=", Fraction(0), f"elemental:H({i}|rest)"))
    for i, j in combinations(range(n), 2):
        a, b = 1 << i, 1 << j
        rest = full ^ a ^ b
        # iterate K over all submasks of rest, ascending
        k = 0
        while True:
            coeffs = {}
            _accumulate(coeffs, a | k, 1)
            _accumulate(coeffs, b | k, 1)
            _accumulate(coeffs, a | b | k, -1)
            _accumulate(coeffs, k, -1)
            rows.append(LinearConstraint.make(coeffs, ">=", Fraction(0), f"elemental:I({i};{j}|{k})"))
            if k == rest:
                break
            k = (k - rest) & rest  # next submask of rest
    assert len(rows) == num_elemental_inequalities(n)
    return ConstraintSystem(n, tuple(rows))


def network_constraints(
    net: Network,
    families: Iterable[int],
    relax: tuple[Fraction, Fraction] | None = None,
) -> ConstraintSystem:
    """Linear constraints a coding scheme's entropy vector must satisfy.

    Family numbering:
      1 source messages and keys mutually independent (plus zero-pins for
        key-only sources);
      2 each source's out-edges determined by its (message, key);
      3 each relay's out-edges determined by its in-edges;
      4 each sink's demanded messages determined by its in-edges;
      5 per-edge capacity h_e <= c_e;
      6 each wiretap set independent of the full message tuple.

    With ``relax=(eps4, eps6)`` families 4 and 6 become one-sided slack
    inequalities (decoding deficit <= eps4, leaked information <= eps6);
    at slack zero they cut the same region as the equalities, given the
    elemental rows.
    """
    fams = set(families)
    if not fams <= {1, 2, 3, 4, 5, 6}:
        raise ValueError(f"unknown families {sorted(fams - {1, 2, 3, 4, 5, 6})}")
    g = GroundSet.from_network(net)
    eps4, eps6 = relax if relax is not None else (None, None)
    rows: list[LinearConstraint] = []
    srcs = sorted(net.sources)
    all_msgs = 0
    for s in srcs:
        all_msgs |= g.message_mask(s)

    if 1 in fams:
        coeffs: dict[int, Fraction] = {}
        joint = 0
        for s in srcs:
            joint |= g.message_mask(s) | g.key_mask(s)
        _accumulate(coeffs, joint, 1)
        for s in srcs:
            _accumulate(coeffs, g.message_mask(s), -1)
            _accumulate(coeffs, g.key_mask(s), -1)
        rows.append(LinearConstraint.make(coeffs, "=", Fraction(0), "independence"))
        for s in srcs:
            if s in net.key_only_sources:
                rows.append(LinearConstraint.make(
                    {g.message_mask(s): Fraction(1)}, "=", Fraction(0), f"independence:key-only:{s}"))

    if 2 in fams:
        for s in srcs:
            outs = net.out_edges(s)
            if not outs:
                continue  # nothing emitted, relation is vacuous
            base = g.message_mask(s) | g.key_mask(s)
            ext = base
            for e in outs:
                ext |= g.edge_mask(e.id)
            coeffs = {}
            _accumulate(coeffs, ext, 1)
            _accumulate(coeffs, base, -1)
            rows.append(LinearConstraint.make(coeffs, "=", Fraction(0), f"source-coding:{s}"))

    if 3 in fams:
        bad = [v for v in net.intermediate_nodes if net.out_edges(v) and not net.in_edges(v)]
        if bad:
            raise ConstraintDomainError(
                f"intermediate node(s) emit without inputs: {bad}; "
                "use promote_key_node to model private randomness")
        for v in net.intermediate_nodes:
            outs = net.out_edges(v)
            if not outs:
                continue
            inp = 0
            for e in net.in_edges(v):
                inp |= g.edge_mask(e.id)
            ext = inp
            for e in outs:
                ext |= g.edge_mask(e.id)
            coeffs = {}
            _accumulate(coeffs, ext, 1)
            _accumulate(coeffs, inp, -1)
            rows.append(LinearConstraint.make(coeffs, "=", Fraction(0), f"relay-coding:{v}"))

    if 4 in fams:
        for t in net.sinks:
            if not t.beta:
                continue
            demand = 0
            for s in t.beta:
                demand |= g.message_mask(s)
            inp = 0
            for e in net.in_edges(t.node):
                inp |= g.edge_mask(e.id)
            coeffs = {}
            _accumulate(coeffs, demand | inp, 1)
            _accumulate(coeffs, inp, -1)
            if eps4 is not None:
                rows.append(LinearConstraint.make(coeffs, "<=", Fraction(eps4), f"decode:{t.node}:relaxed"))
            else:
                rows.append(LinearConstraint.make(coeffs, "=", Fraction(0), f"decode:{t.node}"))

    if 5 in fams:
        for eid in sorted(e.id for e in net.edges):
            rows.append(LinearConstraint.make(
                {g.edge_mask(eid): Fraction(1)}, "<=", net.edge(eid).cap, f"cap:{eid}"))

    if 6 in fams:
        for group in net.wiretap_sets:
            if not group:
                continue
            alpha = 0
            for eid in group:
                alpha |= g.edge_mask(eid)
            label = ",".join(sorted(group))
            if eps6 is not None:
                coeffs = {}
                _accumulate(coeffs, all_msgs, 1)
                _accumulate(coeffs, alpha, 1)
                _accumulate(coeffs, all_msgs | alpha, -1)
                rows.append(LinearConstraint.make(coeffs, "<=", Fraction(eps6), f"secrecy:{label}:relaxed"))
            else:
                coeffs = {}
                _accumulate(coeffs, all_msgs | alpha, 1)
                _accumulate(coeffs, all_msgs, -1)
                _accumulate(coeffs, alpha, -1)
                rows.append(LinearConstraint.make(coeffs, "=", Fraction(0), f"secrecy:{label}"))

    return ConstraintSystem(g.n, tuple(rows))


def serialize_constraints(sys_: ConstraintSystem) -> str:
    """One line per constraint; stable across runs for golden-file tests."""
    lines = [f"# ground-size {sys_.n}"]
    for con in sys_.constraints:
        terms = []
        for mask, c in con.coeffs:
            sign = "+" if c > 0 else "-"
            terms.append(f"{sign}{format_rational(abs(c))}·h{{{mask}}}")
        lines.append(f"{' '.join(terms)} {con.rel} {format_rational(con.rhs)} # {con.tag}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# entropy vectors of explicit distributions


@dataclass(frozen=True)
class EntropyVector:
    """Joint entropies of every nonempty subset of the ground set.

    ``exact`` marks coordinates held as Fractions (possible when every
    subset-marginal mass is a power of two); otherwise coordinates are
    floats good to ~1e-12 and membership tests fall back to tolerances.
    """

    ground: GroundSet
    coords: tuple  # index mask-1 -> value (Fraction or float)
    exact: bool

    def h(self, mask: int):
        if mask == 0:
            return Fraction(0) if self.exact else 0.0
        return self.coords[mask - 1]

    def h_of(self, labels: Iterable[str]):
        return self.h(self.ground.mask_of(labels))


def entropy_bits(pmf: Mapping) -> Fraction | float:
    """Entropy of a plain pmf in bits.

    Exact Fraction when every mass is a power of two, float otherwise.
    """
    masses = [Fraction(p) for p in pmf.values() if p != 0]
    if not masses:
        raise ValueError("empty pmf")
    if sum(masses) != 1:
        raise ValueError("pmf does not sum to 1")
    if any(p < 0 for p in masses):
        raise ValueError("negative probability")
    h = Fraction(0)
    for p in masses:
        k = dyadic_log2(p)
        if k is None:
            return -sum(float(q) * math.log2(float(q)) for q in masses)
        h += p * (-k)
    return h


def entropy_vector_of_pmf(
    pmf: Mapping[tuple, Fraction],
    ground: GroundSet,
    mode: str = "auto",
) -> EntropyVector:
    """Entropy vector of a joint pmf given as {outcome tuple: probability}.

    Outcome tuples list one symbol per ground label, in ground order.
    ``mode`` is "auto" (exact Fractions when every marginal allows it),
    "exact" (raise if not), or "float".
    """
    if mode not in ("auto", "exact", "float"):
        raise ValueError(f"bad mode {mode!r}")
    n = ground.n
    support = [(outcome, Fraction(p)) for outcome, p in pmf.items() if p != 0]
    for outcome, p in support:
        if len(outcome) != n:
            raise ValueError(f"outcome {outcome!r} arity != ground size {n}")
        if p < 0:
            raise ValueError("negative probability")
    total = sum(p for _, p in support)
    if total != 1:
        raise ValueError(f"pmf sums to {total}, not 1")

    exact_vals: list[Fraction | None] = []
    all_exact = True
    for mask in range(1, 1 << n):
        marg: dict[tuple, Fraction] = {}
        sel = [i for i in range(n) if mask >> i & 1]
        for outcome, p in support:
            key = tuple(outcome[i] for i in sel)
            marg[key] = marg.get(key, Fraction(0)) + p
        hs = Fraction(0)
        ok = mode != "float"
        if ok:
            for p in marg.values():
                k = dyadic_log2(p)
                if k is None:
                    ok = False
                    break
                hs += p * (-k)
        if ok:
            exact_vals.append(hs)
        else:
            all_exact = False
            exact_vals.append(None)
            if mode == "exact":
                raise ValueError(
                    f"marginal for mask {mask} has non-dyadic masses; exact mode impossible")
        if not all_exact and mode == "auto":
            # keep going; we recompute as floats below
            pass

    if all_exact and mode in ("auto", "exact"):
        return EntropyVector(ground, tuple(exact_vals), True)

    float_vals: list[float] = []
    for mask in range(1, 1 << n):
        marg_f: dict[tuple, float] = {}
        sel = [i for i in range(n) if mask >> i & 1]
        for outcome, p in support:
            key = tuple(outcome[i] for i in sel)
            marg_f[key] = marg_f.get(key, 0.0) + float(p)
        float_vals.append(-sum(p * math.log2(p) for p in marg_f.values() if p > 0))
    return EntropyVector(ground, tuple(float_vals), False)


@dataclass(frozen=True)
class MembershipEntry:
    tag: str
    rel: Rel
    ok: bool
    slack: Fraction | float  # >= 0 means satisfied for inequalities; deviation for "="


@dataclass(frozen=True)
class MembershipReport:
    ok: bool
    entries: tuple[MembershipEntry, ...]

    @property
    def violations(self) -> tuple[MembershipEntry, ...]:
        return tuple(e for e in self.entries if not e.ok)


def check_membership(
    h: EntropyVector,
    system: ConstraintSystem,
    tol: Fraction = Fraction(1, 10**9),
) -> MembershipReport:
    """Evaluate every constraint on h.

    Exact vectors are compared exactly; float vectors within ``tol``.
    Slack is lhs-rhs for "=", rhs-lhs for "<=", lhs-rhs for ">=".
    """
    if system.n != h.ground.n:
        raise ValueError("constraint system and vector ground sizes differ")
    use_tol = Fraction(0) if h.exact else Fraction(tol)
    entries = []
    all_ok = True
    for con in system.constraints:
        lhs = con.evaluate(h.h)
        if con.rel == "=":
            dev = lhs - con.rhs
            ok = abs(dev) <= use_tol
            slack = dev
        elif con.rel == "<=":
            slack = con.rhs - lhs
            ok = slack >= -use_tol
        else:
            slack = lhs - con.rhs
            ok = slack >= -use_tol
        all_ok = all_ok and ok
        entries.append(MembershipEntry(con.tag, con.rel, ok, slack))
    return MembershipReport(all_ok, tuple(entries))


def scale(h: EntropyVector, a: Fraction) -> EntropyVector:
    """Pointwise scaling; models changing the per-symbol normalization."""
    a = Fraction(a)
    if a < 0:
        raise ValueError("scale factor must be nonnegative")
    if h.exact:
        return EntropyVector(h.ground, tuple(a * v for v in h.coords), True)
    return EntropyVector(h.ground, tuple(float(a) * v for v in h.coords), False)


def project_sources(h: EntropyVector, net: Network):
    """Message-entropy tuple in sorted-source order (the rate point)."""
    g = h.ground
    return tuple(h.h(g.message_mask(s)) for s in sorted(net.sources))


def dominates(r: Sequence, r_prime: Sequence) -> bool:
    """True when r <= r_prime componentwise, i.e. r lies in the
    downward-closed region generated by r_prime (lower demands are free)."""
    if len(r) != len(r_prime):
        raise ValueError("rate tuples must have equal length")
    return all(x <= y for x, y in zip(r, r_prime))
