"""Weak-to-strong secrecy conversion by repetition and extraction.

A registered weak code is an abstract single-application object: message
alphabets, a legitimate-receiver view per (source, sink) pair and an
eavesdropper view per tap, each given as conditional pmf tables over the
full message tuple.  Registration measures the per-use error and leakage
exactly and refuses codes whose measurements exceed the declared budget.

Amplification applies the code L times, sends a short error-correction
message per source (a random linear syndrome of the concatenated message
block, sized to the exact conditional entropy it must cover), draws a
Toeplitz extractor seed per source, and outputs the hashed message block.
Evaluation enumerates the resulting joint distribution exactly at desk
scale and reports leakage toward each tap, distance from uniform of the
hashed messages, a maximal-coupling error account and the typicality
monitor for the repetition block.

Message blocks are bit strings: within one application a message symbol
m in [0, 2^b) contributes b bits, and application 0 occupies the most
significant positions of the packed block.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import gmpy2
import numpy as np

from .extractor import Extractor, extract, maximal_coupling, coupling_mismatch
from .rationals import (
    ceil_log2_sum,
    cmp_log2_sum,
    floor_fraction,
    log2_sum_value,
    parse_rational,
)

STATE_CAP = 1 << 22
SEED_AVG_CAP = 1 << 16
MC_SHARDS = 8

LogTerms = tuple[tuple[Fraction, Fraction], ...]


class WeakCodeFormatError(Exception):
    """Weak-code fixture violates the documented JSON layout."""


class SizingError(Exception):
    """Amplifier parameters do not leave room for at least one output bit."""


class SizeCapError(Exception):
    """Exhaustive evaluation would exceed the configured state cap."""


def _is_pow2(k: int) -> bool:
    return k >= 1 and k & (k - 1) == 0


@dataclass(frozen=True)
class WeakCode:
    """Single-application weak code with measured per-use metrics.

    ``legit_view[(s, t)]`` holds one row per message tuple (row-major over
    sources sorted by name), each row a pmf over the reconstruction of
    source s's message.  ``tap_view[name]`` is (alphabet, rows) for the
    eavesdropper output at that tap.  Measured numbers are produced at
    registration; build instances through make_weak_code or
    parse_weak_code.
    """

    blocklength: int
    msg_sizes: tuple[tuple[str, int], ...]
    legit_view: tuple[tuple[tuple[str, str], tuple[tuple[Fraction, ...], ...]], ...]
    tap_view: tuple[tuple[str, tuple[int, tuple[tuple[Fraction, ...], ...]]], ...]
    declared_eps: Fraction
    measured_error: tuple[tuple[tuple[str, str], Fraction], ...]
    measured_leakage: tuple[tuple[str, Fraction | float], ...]

    @property
    def sources(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.msg_sizes)

    def msg_size(self, s: str) -> int:
        return dict(self.msg_sizes)[s]

    def sinks_of(self, s: str) -> tuple[str, ...]:
        return tuple(t for (s2, t), _ in self.legit_view if s2 == s)

    def rate(self, s: str) -> Fraction:
        size = self.msg_size(s)
        if not _is_pow2(size):
            raise ValueError(f"message alphabet of {s} is not a power of two")
        return Fraction(size.bit_length() - 1, self.blocklength)

    def rows(self) -> list[tuple[int, ...]]:
        """Message tuples in row order (row-major over sorted sources)."""
        return list(itertools.product(*(range(n) for _, n in self.msg_sizes)))


def _check_rows(rows: Sequence[Sequence[Fraction]], n_rows: int, width: int, what: str) -> tuple:
    if len(rows) != n_rows:
        raise WeakCodeFormatError(f"{what}: expected {n_rows} rows, got {len(rows)}")
    out = []
    for i, row in enumerate(rows):
        if len(row) != width:
            raise WeakCodeFormatError(f"{what} row {i}: expected {width} entries")
        row = tuple(Fraction(p) for p in row)
        if any(p < 0 for p in row):
            raise WeakCodeFormatError(f"{what} row {i}: negative probability")
        if sum(row) != 1:
            raise WeakCodeFormatError(f"{what} row {i}: probabilities sum to {sum(row)}")
        out.append(row)
    return tuple(out)


def _mutual_information_terms(
    n_rows: int,
    table: Sequence[Sequence[Fraction]],
) -> LogTerms:
    """Terms (w, a) with I(messages; output) = sum w*log2(a), messages uniform."""
    u = Fraction(1, n_rows)
    width = len(table[0])
    marg = [Fraction(0)] * width
    for row in table:
        for y, p in enumerate(row):
            marg[y] += u * p
    terms = []
    for row in table:
        for y, p in enumerate(row):
            if p > 0:
                terms.append((u * p, p / marg[y]))
    return tuple(terms)


def make_weak_code(
    blocklength: int,
    msg_sizes: Mapping[str, int],
    legit_view: Mapping,
    tap_view: Mapping,
    declared_eps,
) -> WeakCode:
    """Validate tables, measure error and leakage exactly, and register.

    Raises WeakCodeFormatError for layout problems and ValueError when a
    measured metric exceeds the declared per-use budget.
    """
    declared_eps = Fraction(declared_eps)
    if declared_eps < 0:
        raise WeakCodeFormatError("declared eps must be nonnegative")
    if blocklength < 1:
        raise WeakCodeFormatError("blocklength must be at least 1")
    if not msg_sizes:
        raise WeakCodeFormatError("at least one source required")
    sizes = tuple(sorted((s, int(n)) for s, n in msg_sizes.items()))
    for s, n in sizes:
        if n < 2:
            raise WeakCodeFormatError(f"message alphabet of {s} must have >= 2 symbols")
    rows = list(itertools.product(*(range(n) for _, n in sizes)))
    src_index = {s: i for i, (s, _) in enumerate(sizes)}

    legit = []
    errors = []
    for s in sorted(legit_view):
        if s not in src_index:
            raise WeakCodeFormatError(f"legit view for unknown source {s!r}")
        for t in sorted(legit_view[s]):
            width = dict(sizes)[s]
            table = _check_rows(legit_view[s][t], len(rows), width, f"legit {s}->{t}")
            legit.append(((s, t), table))
            u = Fraction(1, len(rows))
            p_err = sum(
                (u * (1 - table[i][m[src_index[s]]]) for i, m in enumerate(rows)),
                Fraction(0),
            )
            if p_err > declared_eps:
                raise ValueError(
                    f"measured error {p_err} for {s}->{t} exceeds declared {declared_eps}"
                )
            errors.append(((s, t), p_err))
    if not legit:
        raise WeakCodeFormatError("at least one legitimate view required")

    taps = []
    leaks = []
    budget = declared_eps * blocklength
    for name in sorted(tap_view):
        alphabet, table = tap_view[name]
        alphabet = int(alphabet)
        if alphabet < 1:
            raise WeakCodeFormatError(f"tap {name}: alphabet must be positive")
        table = _check_rows(table, len(rows), alphabet, f"tap {name}")
        terms = _mutual_information_terms(len(rows), table)
        if cmp_log2_sum(terms, budget) > 0:
            raise ValueError(
                f"measured leakage {float(log2_sum_value(terms)):.6f} bits at tap "
                f"{name} exceeds declared {declared_eps} * n = {budget}"
            )
        taps.append((name, (alphabet, table)))
        leaks.append((name, log2_sum_value(terms)))
    if not taps:
        raise WeakCodeFormatError("at least one eavesdropper view required")

    return WeakCode(
        blocklength=blocklength,
        msg_sizes=sizes,
        legit_view=tuple(legit),
        tap_view=tuple(taps),
        declared_eps=declared_eps,
        measured_error=tuple(errors),
        measured_leakage=tuple(leaks),
    )


def parse_weak_code(text: str) -> WeakCode:
    """Parse the weak-code JSON fixture format.

    Keys: blocklength, messages {source: size}, declared_eps ("p/q"),
    legit_view {source: {sink: rows}}, eavesdropper_view
    {tap: {"alphabet": k, "table": rows}}.  Probabilities are rational
    strings; rows are indexed row-major over sources sorted by name.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WeakCodeFormatError(f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise WeakCodeFormatError("top level must be an object")
    required = {"blocklength", "messages", "declared_eps", "legit_view", "eavesdropper_view"}
    extra = set(raw) - required
    if extra:
        raise WeakCodeFormatError(f"unknown keys: {sorted(extra)}")
    missing = required - set(raw)
    if missing:
        raise WeakCodeFormatError(f"missing keys: {sorted(missing)}")

    def parse_row(row) -> list[Fraction]:
        if not isinstance(row, list):
            raise WeakCodeFormatError("pmf row must be a list")
        return [parse_rational(p) for p in row]

    if not isinstance(raw["legit_view"], dict) or not isinstance(raw["eavesdropper_view"], dict):
        raise WeakCodeFormatError("views must be objects")
    legit = {
        s: {t: [parse_row(r) for r in rows] for t, rows in views.items()}
        for s, views in raw["legit_view"].items()
    }
    taps = {}
    for name, spec in raw["eavesdropper_view"].items():
        if set(spec) != {"alphabet", "table"}:
            raise WeakCodeFormatError(f"tap {name}: expected alphabet and table keys")
        taps[name] = (spec["alphabet"], [parse_row(r) for r in spec["table"]])
    return make_weak_code(
        blocklength=raw["blocklength"],
        msg_sizes=raw["messages"],
        legit_view=legit,
        tap_view=taps,
        declared_eps=parse_rational(raw["declared_eps"]),
    )


@dataclass(frozen=True)
class SourcePlan:
    """Per-source sizing and drawn randomness for one amplified instance."""

    source: str
    n1: int
    o_len: int
    o_budget: Fraction
    eps3: Fraction
    n3_target: Fraction
    n3: int
    n2: int
    extractor: Extractor
    seed_v: int
    synd_rows: tuple[int, ...]
    delta1_actual: Fraction


@dataclass(frozen=True)
class AmplifiedCode:
    """L-fold amplified instance: plans, drawn seeds and rate accounting.

    extra_uses_budget charges the seed at the requested delta1 rate, the
    way the existential-extractor accounting does; extra_uses_actual
    charges the Toeplitz seed actually drawn.  Both divide the side-bit
    counts by the common-rate capacity of the broadcast channel that
    carries (O_s, V_s) back out to the sinks.
    """

    weak: WeakCode
    L: int
    lam: Fraction
    eps2: Fraction
    delta1: Fraction
    delta2: Fraction
    master_seed: int
    plans: tuple[SourcePlan, ...]
    p_star: Fraction
    gamma: Fraction
    tap_cells: int
    extra_uses_budget: Fraction
    extra_uses_actual: Fraction
    inflation_target: Fraction
    within_budget: bool
    within_actual: bool

    def plan(self, s: str) -> SourcePlan:
        for p in self.plans:
            if p.source == s:
                return p
        raise KeyError(s)


def _cond_entropy_terms(
    rows: Sequence[tuple[int, ...]],
    table: Sequence[Sequence[Fraction]],
    comp: int,
) -> LogTerms:
    """Terms for H(M_s | reconstruction), other sources marginalized out."""
    u = Fraction(1, len(rows))
    joint: dict[tuple[int, int], Fraction] = {}
    marg: dict[int, Fraction] = {}
    for i, m in enumerate(rows):
        for y, p in enumerate(table[i]):
            if p == 0:
                continue
            joint[(m[comp], y)] = joint.get((m[comp], y), Fraction(0)) + u * p
            marg[y] = marg.get(y, Fraction(0)) + u * p
    return tuple((w, marg[y] / w) for (x, y), w in joint.items())


def amplify(
    weak: WeakCode,
    L: int,
    delta1,
    delta2,
    eps2=Fraction(1, 4),
    lam="auto",
    seed: int = 0,
) -> AmplifiedCode:
    """Size and draw an L-fold amplified instance of a registered weak code.

    lam is the min-entropy-drop slack: "auto" selects blocklength +
    ceil(log2 L); any positive rational is accepted.  delta1 is the seed
    rate the accounting budget charges, delta2 the output-length slack.
    Raises SizingError when some source cannot afford one output bit, with
    the length formula echoed.
    """
    if L < 1:
        raise SizingError("L must be at least 1")
    delta1 = Fraction(delta1)
    delta2 = Fraction(delta2)
    eps2 = Fraction(eps2)
    for name, val in (("delta1", delta1), ("delta2", delta2), ("eps2", eps2)):
        if not 0 < val < 1:
            raise SizingError(f"{name} must lie in (0, 1)")
    n = weak.blocklength
    if lam == "auto":
        lam = Fraction(n + max(0, (L - 1).bit_length()))
    else:
        lam = Fraction(lam)
    if lam <= 0:
        raise SizingError("lam must be positive")
    eps = weak.declared_eps
    rows = weak.rows()
    rng = random.Random(seed)

    # side-message lengths first: every source's budget subtracts all of them
    o_lens: dict[str, int] = {}
    o_budgets: dict[str, Fraction] = {}
    comp_of = {s: i for i, (s, _) in enumerate(weak.msg_sizes)}
    for s in weak.sources:
        r_s = weak.rate(s)
        need = 0
        for (s2, t), table in weak.legit_view:
            if s2 != s:
                continue
            need = max(need, ceil_log2_sum(_cond_entropy_terms(rows, table, comp_of[s]), L))
        budget = L * (n * r_s * eps + 1)
        if need > budget:
            raise SizingError(
                f"side message for {s} needs {need} bits, above the "
                f"L*(n*r*eps + 1) = {budget} budget"
            )
        o_lens[s] = need
        o_budgets[s] = budget
    o_total = sum(o_lens.values())

    plans = []
    extra_budget = Fraction(0)
    extra_actual = Fraction(0)
    for s in weak.sources:
        r_s = weak.rate(s)
        block_bits = L * n * r_s
        n1 = int(block_bits)
        eps3 = 1 - ((1 - eps2) * L * n * (r_s - eps) - o_total - lam) / block_bits
        n3_target = (1 - eps3 - delta2) * block_bits
        n3 = floor_fraction(n3_target)
        if n3 < 1:
            raise SizingError(
                f"source {s}: n3 = floor((1 - eps3 - delta2) * L*n*r) = "
                f"floor((1 - {eps3} - {delta2}) * {block_bits}) = {n3} < 1; "
                "increase L or loosen the slacks"
            )
        n2 = n1 + n3 - 1
        plans.append(
            SourcePlan(
                source=s,
                n1=n1,
                o_len=o_lens[s],
                o_budget=o_budgets[s],
                eps3=eps3,
                n3_target=n3_target,
                n3=n3,
                n2=n2,
                extractor=Extractor(n1=n1, n2=n2, n3=n3),
                seed_v=rng.getrandbits(n2),
                synd_rows=tuple(rng.getrandbits(n1) for _ in range(o_lens[s])),
                delta1_actual=Fraction(n2) / block_bits,
            )
        )
        # common-rate capacity of the broadcast side channel for this source
        denom = (r_s - eps) * (1 - len(weak.sinks_of(s)) * eps) - Fraction(1, n)
        if denom <= 0:
            raise SizingError(
                f"source {s}: side-channel rate (r - eps)(1 - |D|eps) - 1/n = "
                f"{denom} is not positive; the weak code is too lossy"
            )
        extra_budget += (delta1 * block_bits + o_lens[s]) / denom
        extra_actual += (n2 + o_lens[s]) / denom

    # typicality monitor parameters for the repetition block
    p_star = None
    cells = 0
    u = Fraction(1, len(rows))
    for name, (alphabet, table) in weak.tap_view:
        cells += len(rows) * alphabet
        for row in table:
            for p in row:
                if p > 0 and (p_star is None or u * p < p_star):
                    p_star = u * p
    gamma = 2 * eps2 * eps2 * p_star
    target = L * n * delta2

    return AmplifiedCode(
        weak=weak,
        L=L,
        lam=lam,
        eps2=eps2,
        delta1=delta1,
        delta2=delta2,
        master_seed=seed,
        plans=tuple(plans),
        p_star=p_star,
        gamma=gamma,
        tap_cells=cells,
        extra_uses_budget=extra_budget,
        extra_uses_actual=extra_actual,
        inflation_target=target,
        within_budget=extra_budget <= target,
        within_actual=extra_actual <= target,
    )


@dataclass(frozen=True)
class PinskerCheck:
    source: str
    dtv: Fraction
    kl_bits: Fraction | float
    holds: bool | None  # None when the interval check stayed inconclusive


@dataclass(frozen=True)
class EventBCheck:
    tap: str
    p_fail: Fraction
    bound_exponent: float
    holds: bool


@dataclass(frozen=True)
class AmplifiedReport:
    mode: str
    seed_mode: str
    trials: int | None
    eval_seed: int | None
    leakage: tuple[tuple[str, Fraction | float], ...]
    leakage_terms: tuple[tuple[str, LogTerms], ...]
    leakage_ci: tuple[tuple[str, tuple[float, float]], ...] | None
    dtv: tuple[tuple[str, Fraction], ...]
    coupling_error: tuple[tuple[str, Fraction], ...]
    pinsker: tuple[PinskerCheck, ...]
    sw_failure: tuple[tuple[tuple[str, str], Fraction | None], ...]
    error_bound: tuple[tuple[tuple[str, str], Fraction | None], ...]
    event_b: tuple[EventBCheck, ...]
    event_b_union: Fraction
    event_b_bound_holds: bool
    notes: tuple[str, ...]

    def leakage_of(self, tap: str) -> Fraction | float:
        return dict(self.leakage)[tap]


def _entropy_terms(counts: Mapping, denom: int) -> LogTerms:
    """Terms with H = sum w*log2(a) for a pmf given as integer counts/denom."""
    return tuple(
        (Fraction(c, denom), Fraction(denom, c)) for c in counts.values() if c
    )


def _pack_block(symbols: Sequence[int], bits: int) -> int:
    out = 0
    for m in symbols:
        out = (out << bits) | m
    return out


def _syndrome(t: int, rows: Sequence[int]) -> int:
    out = 0
    for j, row in enumerate(rows):
        out |= ((t & row).bit_count() & 1) << j
    return out


def _kron_rows(int_rows: list[list[int]], L: int, cap: int) -> np.ndarray:
    d = len(int_rows)
    width = len(int_rows[0])
    if d**L * width**L > cap:
        raise SizeCapError(
            f"per-use pattern tensor needs {d ** L} x {width ** L} cells, cap {cap}"
        )
    out = np.ones((1, 1), dtype=np.int64)
    base = np.asarray(int_rows, dtype=np.int64)
    for _ in range(L):
        out = np.kron(out, base)
    return out


def _pinsker_holds(dtv: Fraction, kl_terms: LogTerms) -> bool | None:
    """Certified check of dtv <= sqrt(0.5 * KL * ln 2), KL given in bits.

    Squares both sides and compares 2*dtv^2 against the KL divergence in
    nats with outward-rounded interval arithmetic.
    """
    if dtv == 0:
        return True
    lhs = gmpy2.mpq(2 * dtv.numerator**2, dtv.denominator**2)
    terms = []
    for w, a in kl_terms:
        if a == 1 or w == 0:
            continue
        if w < 0:
            w, a = -w, 1 / a
        terms.append((w, a))
    for prec in (128, 512, 2048, 8192):
        down = gmpy2.context(precision=prec, round=gmpy2.RoundDown)
        up = gmpy2.context(precision=prec, round=gmpy2.RoundUp)
        lo = gmpy2.mpfr(0)
        hi = gmpy2.mpfr(0)
        for w, a in terms:
            wq = gmpy2.mpq(w.numerator, w.denominator)
            num, den = gmpy2.mpz(a.numerator), gmpy2.mpz(a.denominator)
            lo = down.add(lo, down.mul(wq, down.sub(down.log(num), up.log(den))))
            hi = up.add(hi, up.mul(wq, up.sub(up.log(num), down.log(den))))
        if lo >= lhs:
            return True
        if hi < lhs:
            return False
    return None


def _event_b_prob(cell_probs: list[Fraction], L: int, eps2: Fraction) -> Fraction:
    """Exact P(every cell count within eps2 relative window) over L draws."""
    windows = []
    for p in cell_probs:
        lo = -floor_fraction(-(L * p * (1 - eps2)))  # ceil
        hi = floor_fraction(L * p * (1 + eps2))
        if lo > hi:
            return Fraction(0)
        windows.append((lo, hi, p))
    total = Fraction(0)

    def rec(i: int, left: int, weight: Fraction):
        nonlocal total
        lo, hi, p = windows[i]
        if i == len(windows) - 1:
            if lo <= left <= hi:
                total += weight * p**left / math.factorial(left)
            return
        for c in range(lo, min(hi, left) + 1):
            rec(i + 1, left - c, weight * p**c / math.factorial(c))

    rec(0, L, Fraction(math.factorial(L)))
    return total


def _le_cells_bound(p_fail: Fraction, cells: int, gamma_l: Fraction) -> bool:
    """Exact p_fail <= 2 * cells * 2^(-gamma_l) by cross-raising."""
    if p_fail == 0:
        return True
    a, b = gamma_l.numerator, gamma_l.denominator
    return p_fail.numerator**b * 2**a <= (2 * cells) ** b * p_fail.denominator**b


def evaluate_amplified(
    amp: AmplifiedCode,
    mode: str = "exhaustive",
    trials: int | None = None,
    seed: int | None = None,
    seed_mode: str = "instance",
    state_cap: int = STATE_CAP,
) -> AmplifiedReport:
    """Evaluate an amplified instance toward every tap.

    Exhaustive mode enumerates all message blocks and accumulates the
    joint law of (hashed messages, side messages, tap output block) with
    integer counts over a common denominator, so leakage values support
    certified comparisons.  seed_mode "instance" conditions on the drawn
    extractor seeds; "average" (single source, small n2 only) averages
    the seed out as well, which is the distribution the strong-secrecy
    statement quantifies.  Monte Carlo mode draws message blocks and
    reports a plug-in estimate with a shard-split confidence interval.
    """
    weak = amp.weak
    L = amp.L
    rows = weak.rows()
    n_rows = len(rows)
    notes: list[str] = []
    if mode not in ("exhaustive", "montecarlo"):
        raise ValueError(f"unknown mode {mode!r}")
    if seed_mode not in ("instance", "average"):
        raise ValueError(f"unknown seed_mode {seed_mode!r}")
    if mode == "montecarlo":
        if not trials or trials < 1 or seed is None:
            raise ValueError("montecarlo mode needs trials >= 1 and a seed")
        if seed_mode == "average":
            raise ValueError("seed averaging is an exhaustive-only feature")
    if seed_mode == "average":
        if len(weak.sources) != 1:
            raise ValueError("seed averaging supports single-source codes only")
        if 1 << amp.plans[0].n2 > SEED_AVG_CAP:
            raise SizeCapError(
                f"seed averaging over 2^{amp.plans[0].n2} seeds exceeds cap {SEED_AVG_CAP}"
            )
    if mode == "exhaustive" and n_rows**L > state_cap:
        raise SizeCapError(
            f"exhaustive evaluation needs {n_rows}^{L} message blocks, cap {state_cap}"
        )

    bit_widths = {s: size.bit_length() - 1 for s, size in weak.msg_sizes}
    comp_of = {s: i for i, (s, _) in enumerate(weak.msg_sizes)}
    seeds_list = (
        [None]
        if seed_mode == "instance"
        else list(range(1 << amp.plans[0].n2))
    )
    multi_seed = seed_mode == "average"

    # distinct conditional rows per tap collapse the per-use pattern space
    tap_patterns: dict[str, tuple[list[int], list[tuple[Fraction, ...]]]] = {}
    weights: dict[str, tuple[np.ndarray, int]] = {}
    for name, (alphabet, table) in weak.tap_view:
        distinct: dict[tuple, int] = {}
        row_to_pat = []
        for row in table:
            pid = distinct.setdefault(row, len(distinct))
            row_to_pat.append(pid)
        pats = [row for row, _ in sorted(distinct.items(), key=lambda kv: kv[1])]
        tap_patterns[name] = (row_to_pat, pats)
        q = 1
        for row in pats:
            for p in row:
                q = q * p.denominator // math.gcd(q, p.denominator)
        int_rows = [[int(p * q) for p in row] for row in pats]
        peak = max(max(r) for r in int_rows)
        if n_rows**L * peak**L * max(1, len(seeds_list)) >= 1 << 62:
            raise SizeCapError(f"tap {name}: integer weights would overflow int64")
        weights[name] = (_kron_rows(int_rows, L, state_cap), q)

    def accumulate(block_iter: Iterable[tuple[int, ...]]) -> tuple[dict, int]:
        """Counts per (hashed outputs, syndromes, seed) key and pattern sequence."""
        per_key: dict[tuple, dict[str, dict[int, int]]] = {}
        count = 0
        for block in block_iter:
            count += 1
            t_bits = {}
            for s in weak.sources:
                comp = comp_of[s]
                t_bits[s] = _pack_block([rows[i][comp] for i in block], bit_widths[s])
            o_val = tuple(
                _syndrome(t_bits[s], amp.plan(s).synd_rows) for s in weak.sources
            )
            ps_of = {}
            for name, (row_to_pat, pats) in tap_patterns.items():
                d = len(pats)
                ps = 0
                for i in block:
                    ps = ps * d + row_to_pat[i]
                ps_of[name] = ps
            for v in seeds_list:
                e_val = tuple(
                    extract(
                        amp.plan(s).extractor,
                        t_bits[s],
                        amp.plan(s).seed_v if v is None else v,
                    )
                    for s in weak.sources
                )
                buckets = per_key.setdefault((e_val, o_val, v), {})
                for name, ps in ps_of.items():
                    counts = buckets.setdefault(name, {})
                    counts[ps] = counts.get(ps, 0) + 1
        return per_key, count

    def tap_leakage(per_key: dict, n_blocks: int, name: str) -> tuple[Fraction | float, LogTerms]:
        W, q = weights[name]
        denom = n_blocks * len(seeds_list) * q**L
        c_m: dict[tuple, int] = {}
        c_obs: dict[tuple, int] = {}
        c_all: dict[tuple, int] = {}
        total = 0
        for (e_val, o_val, v), buckets in per_key.items():
            vec = np.zeros(W.shape[1], dtype=np.int64)
            for ps, c in buckets[name].items():
                vec += c * W[ps]
            mass = int(vec.sum())
            total += mass
            c_m[e_val] = c_m.get(e_val, 0) + mass
            for y, c in enumerate(vec.tolist()):
                if c:
                    c_obs[(o_val, v, y)] = c_obs.get((o_val, v, y), 0) + c
                    c_all[(e_val, o_val, v, y)] = c_all.get((e_val, o_val, v, y), 0) + c
        if total != denom:
            raise RuntimeError("joint mass bookkeeping failed")
        terms = (
            _entropy_terms(c_m, denom)
            + _entropy_terms(c_obs, denom)
            + tuple((-w, a) for w, a in _entropy_terms(c_all, denom))
        )
        return log2_sum_value(terms), terms

    if mode == "exhaustive":
        block_iter: Iterable[tuple[int, ...]] = itertools.product(range(n_rows), repeat=L)
    else:
        rng0 = random.Random(seed)
        block_iter = [
            tuple(rng0.randrange(n_rows) for _ in range(L)) for _ in range(trials)
        ]
    per_key, n_blocks = accumulate(block_iter)

    leakage = []
    leakage_terms = []
    ci_list = [] if mode == "montecarlo" else None
    for name, _ in weak.tap_view:
        value, terms = tap_leakage(per_key, n_blocks, name)
        if mode == "montecarlo" and isinstance(value, Fraction):
            value = float(value)
        leakage.append((name, value))
        leakage_terms.append((name, terms))
    if mode == "montecarlo":
        # batch-means interval from disjoint shards of the same draw stream
        rng = random.Random(seed)
        shard_size = max(1, trials // MC_SHARDS)
        shard_vals: dict[str, list[float]] = {name: [] for name, _ in weak.tap_view}
        for _ in range(MC_SHARDS):
            shard_blocks = [
                tuple(rng.randrange(n_rows) for _ in range(L)) for _ in range(shard_size)
            ]
            sk, sc = accumulate(shard_blocks)
            for name, _ in weak.tap_view:
                v, _t = tap_leakage(sk, sc, name)
                shard_vals[name].append(float(v))
        for name, vals in shard_vals.items():
            mean = sum(vals) / len(vals)
            sd = math.sqrt(sum((v - mean) ** 2 for v in vals) / (len(vals) - 1))
            half = 1.96 * sd / math.sqrt(len(vals))
            ci_list.append((name, (mean - half, mean + half)))
        notes.append(
            "montecarlo: plug-in leakage is biased upward; ci is a batch-means "
            "interval at shard size, not a bracket on the exhaustive value"
        )

    # typicality monitor over per-use cells (message tuple, tap symbol)
    eb_checks = []
    p_fail_union = Fraction(0)
    gamma_l = amp.gamma * L
    for name, (alphabet, table) in weak.tap_view:
        cell_probs = [Fraction(1, n_rows) * p for row in table for p in row if p > 0]
        p_fail = 1 - _event_b_prob(cell_probs, L, amp.eps2)
        p_fail_union += p_fail
        eb_checks.append(
            EventBCheck(
                tap=name,
                p_fail=p_fail,
                bound_exponent=float(1 + math.log2(amp.tap_cells) - gamma_l),
                holds=_le_cells_bound(p_fail, amp.tap_cells, gamma_l),
            )
        )
    union_holds = _le_cells_bound(p_fail_union, amp.tap_cells, gamma_l)

    # per-source uniformity of the hashed message, from any one tap's table
    name0 = weak.tap_view[0][0]
    W0, q0 = weights[name0]
    denom0 = n_blocks * len(seeds_list) * q0**L
    c_ms: dict[str, dict[int, int]] = {s: {} for s in weak.sources}
    for (e_val, o_val, v), buckets in per_key.items():
        mass = 0
        for ps, c in buckets[name0].items():
            mass += c * int(W0[ps].sum())
        for i, s in enumerate(weak.sources):
            c_ms[s][e_val[i]] = c_ms[s].get(e_val[i], 0) + mass

    dtv_list = []
    coupling_list = []
    pinsker_list = []
    for s in weak.sources:
        plan = amp.plan(s)
        out_space = 1 << plan.n3
        pmf = {e: Fraction(c, denom0) for e, c in c_ms[s].items() if c}
        uni = {e: Fraction(1, out_space) for e in range(out_space)}
        d = sum(
            (abs(pmf.get(e, Fraction(0)) - uni[e]) for e in range(out_space)),
            Fraction(0),
        ) / 2
        dtv_list.append((s, d))
        mism = coupling_mismatch(maximal_coupling(pmf, uni))
        if mism != d:
            raise RuntimeError("maximal coupling mismatch disagrees with d_TV")
        coupling_list.append((s, mism))
        kl_terms = tuple((w, w * out_space) for w in pmf.values())
        pinsker_list.append(
            PinskerCheck(
                source=s,
                dtv=d,
                kl_bits=log2_sum_value(kl_terms),
                holds=_pinsker_holds(d, kl_terms),
            )
        )

    # side-information decoding: exactly zero failure for deterministic-correct
    # legit views; stochastic views are not enumerated here
    sw = []
    err = []
    for (s, t), table in weak.legit_view:
        comp = comp_of[s]
        if all(table[i][m[comp]] == 1 for i, m in enumerate(rows)):
            fail = Fraction(0)
        else:
            fail = None
            notes.append(f"sw decode failure for {s}->{t} not enumerated (stochastic view)")
        sw.append(((s, t), fail))
        d = dict(dtv_list)[s]
        err.append(((s, t), None if fail is None else d + fail))

    return AmplifiedReport(
        mode=mode,
        seed_mode=seed_mode,
        trials=trials,
        eval_seed=seed,
        leakage=tuple(leakage),
        leakage_terms=tuple(leakage_terms),
        leakage_ci=tuple(ci_list) if ci_list is not None else None,
        dtv=tuple(dtv_list),
        coupling_error=tuple(coupling_list),
        pinsker=tuple(pinsker_list),
        sw_failure=tuple(sw),
        error_bound=tuple(err),
        event_b=tuple(eb_checks),
        event_b_union=p_fail_union,
        event_b_bound_holds=union_holds,
        notes=tuple(notes),
    )


def leakage_trend_nonincreasing(reports: Sequence[AmplifiedReport], tap: str) -> bool:
    """Certified check that leakage toward ``tap`` never increases along reports."""
    for first, second in zip(reports, reports[1:]):
        a = dict(first.leakage_terms)[tap]
        b = dict(second.leakage_terms)[tap]
        diff = tuple(a) + tuple((-w, v) for w, v in b)
        if cmp_log2_sum(diff, 0) < 0:
            return False
    return True
