"""Robust typicality: membership, enumeration, counting, pushforward.

A length-n sequence is typical for pmf p when its empirical distribution
pi satisfies |pi(x) - p(x)| <= eps*p(x) for every symbol x, including
zero-probability symbols (which therefore must not appear).  Everything
that matters downstream depends on the sequence only through its symbol
counts, so set sizes and probabilities are computed exactly over count
vectors (types) instead of raw sequences; that keeps blocklengths in the
hundreds tractable where enumeration would need |X|^n work.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Callable, Hashable, Iterable, Iterator, Mapping, Sequence

from .entropy import SizeCapError

Symbol = Hashable
Pmf = Mapping[Symbol, Fraction]

ENUM_CAP = 1 << 22


def _check_pmf(pmf: Pmf) -> dict:
    if not pmf:
        raise ValueError("empty pmf")
    total = Fraction(0)
    for x, p in pmf.items():
        p = Fraction(p)
        if p < 0:
            raise ValueError(f"negative probability for {x!r}")
        total += p
    if total != 1:
        raise ValueError(f"pmf sums to {total}, not 1")
    return {x: Fraction(p) for x, p in pmf.items()}


def empirical_distribution(xs: Sequence[Symbol]) -> dict:
    """Relative symbol frequencies of a sequence, as exact Fractions."""
    if len(xs) == 0:
        raise ValueError("empty sequence has no empirical distribution")
    n = len(xs)
    counts: dict = {}
    for x in xs:
        counts[x] = counts.get(x, 0) + 1
    return {x: Fraction(c, n) for x, c in counts.items()}


def _counts_typical(counts: Mapping[Symbol, int], n: int, pmf: Pmf, eps: Fraction) -> bool:
    # symbols outside the support must not occur at all
    for x, c in counts.items():
        if c and x not in pmf:
            return False
    for x, p in pmf.items():
        c = counts.get(x, 0)
        if abs(Fraction(c, n) - p) > eps * p:
            return False
    return True


def is_typical(xs: Sequence[Symbol], pmf: Pmf, eps: Fraction) -> bool:
    """|pi(x) - p(x)| <= eps*p(x) for every symbol of the pmf's alphabet."""
    pmf = _check_pmf(pmf)
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    counts: dict = {}
    for x in xs:
        counts[x] = counts.get(x, 0) + 1
    return _counts_typical(counts, len(xs), pmf, eps)


def _sorted_symbols(pmf: Pmf) -> list:
    return sorted(pmf)


def iter_typical(pmf: Pmf, n: int, eps: Fraction) -> Iterator[tuple]:
    """Stream typical sequences in lexicographic symbol order (no cap)."""
    pmf = _check_pmf(pmf)
    eps = Fraction(eps)
    if n < 1:
        raise ValueError("n must be at least 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    symbols = _sorted_symbols(pmf)
    support = [x for x in symbols if pmf[x] > 0]
    for seq in itertools.product(support, repeat=n):
        counts: dict = {}
        for x in seq:
            counts[x] = counts.get(x, 0) + 1
        if _counts_typical(counts, n, pmf, eps):
            yield seq


def typical_set(pmf: Pmf, n: int, eps: Fraction, cap: int = ENUM_CAP) -> list[tuple]:
    """Materialized typical set; refuses when |support|^n exceeds ``cap``."""
    pmf = _check_pmf(pmf)
    support = sum(1 for p in pmf.values() if p > 0)
    if support ** n > cap:
        raise SizeCapError(
            f"enumerating {support}^{n} sequences exceeds cap {cap}; "
            "use is_typical membership tests or iter_typical streaming")
    return list(iter_typical(pmf, n, eps))


def _typical_types(pmf: Pmf, n: int, eps: Fraction) -> Iterator[tuple[tuple[int, ...], int]]:
    """(count vector over sorted support, multinomial coefficient) pairs
    for every typical type.  |support| is tiny here, so composition
    enumeration (polynomial in n for fixed alphabet) beats sequence
    enumeration by an exponential factor."""
    symbols = [x for x in _sorted_symbols(pmf) if pmf[x] > 0]
    k = len(symbols)
    # per-symbol admissible count windows
    lo, hi = [], []
    for x in symbols:
        p = pmf[x]
        lo_x = (p - eps * p) * n
        hi_x = (p + eps * p) * n
        lo.append(max(0, -((-lo_x.numerator) // lo_x.denominator)))  # ceil
        hi.append(min(n, hi_x.numerator // hi_x.denominator))        # floor

    def rec(i: int, left: int, counts: list[int]) -> Iterator[tuple[tuple[int, ...], int]]:
        if i == k - 1:
            if lo[i] <= left <= hi[i]:
                yield tuple(counts + [left]), 0
            return
        tail_lo = sum(lo[i + 1:])
        tail_hi = sum(hi[i + 1:])
        for c in range(max(lo[i], left - tail_hi), min(hi[i], left - tail_lo) + 1):
            yield from rec(i + 1, left - c, counts + [c])

    for counts, _ in rec(0, n, []):
        coeff = 1
        rest = n
        for c in counts:
            coeff *= comb(rest, c)
            rest -= c
        yield counts, coeff


def typical_set_size(pmf: Pmf, n: int, eps: Fraction) -> int:
    """|T_eps^(n)| computed exactly by summing multinomials over types."""
    pmf = _check_pmf(pmf)
    eps = Fraction(eps)
    if n < 1 or eps <= 0:
        raise ValueError("need n >= 1 and eps > 0")
    return sum(coeff for _, coeff in _typical_types(pmf, n, eps))


def typical_probability(pmf: Pmf, n: int, eps: Fraction) -> Fraction:
    """P(X^n typical) for X^n iid from the pmf, exact via type counting."""
    pmf = _check_pmf(pmf)
    eps = Fraction(eps)
    if n < 1 or eps <= 0:
        raise ValueError("need n >= 1 and eps > 0")
    symbols = [x for x in _sorted_symbols(pmf) if pmf[x] > 0]
    total = Fraction(0)
    for counts, coeff in _typical_types(pmf, n, eps):
        prob = Fraction(coeff)
        for x, c in zip(symbols, counts):
            prob *= pmf[x] ** c
        total += prob
    return total


def size_bracket_holds(pmf: Pmf, n: int, eps: Fraction) -> bool:
    """Strict bracket (1-eps)*2^(n(1-eps)H) < |T| < 2^(n(1+eps)H).

    Holds only for n large enough; callers record the onset blocklength.
    Comparisons avoid floats: |T|, the 2-powers and (1-eps) are compared
    through exact rational exponent arithmetic when H is rational, and
    through careful float bounds otherwise.
    """
    from .entropy import entropy_bits  # local import, avoids cycle at module load

    pmf = _check_pmf(pmf)
    eps = Fraction(eps)
    size = typical_set_size(pmf, n, eps)
    if size == 0:
        return False
    h = entropy_bits(pmf)
    if isinstance(h, Fraction):
        lo_exp = n * (1 - eps) * h
        hi_exp = n * (1 + eps) * h
        return _lt_pow2(Fraction(1) - eps, lo_exp, size) and _size_lt_pow2(size, hi_exp)
    # float fallback with a hair of slack on both ends
    import math

    lo = math.log2(float(1 - eps)) + n * float(1 - eps) * h
    hi = n * float(1 + eps) * h
    return lo < math.log2(size) < hi


def lower_size_bound_holds(pmf: Pmf, n: int, eps: Fraction) -> bool:
    """Lower half of the bracket only: (1-eps)*2^(n(1-eps)H) < |T|.

    This side alone gates the analytic rate lower bounds, which divide
    log|T| from below; the upper side is irrelevant for them.
    """
    from .entropy import entropy_bits

    pmf = _check_pmf(pmf)
    eps = Fraction(eps)
    size = typical_set_size(pmf, n, eps)
    if size == 0:
        return False
    h = entropy_bits(pmf)
    if isinstance(h, Fraction):
        return _lt_pow2(Fraction(1) - eps, n * (1 - eps) * h, size)
    import math

    return math.log2(float(1 - eps)) + n * float(1 - eps) * h < math.log2(size)


def _lt_pow2(mult: Fraction, exp: Fraction, size: int) -> bool:
    # mult * 2^exp < size  <=>  mult^q * 2^p < size^q with exp = p/q
    p, q = exp.numerator, exp.denominator
    lhs_num = mult.numerator ** q * (2 ** p if p >= 0 else 1)
    lhs_den = mult.denominator ** q * (1 if p >= 0 else 2 ** (-p))
    return Fraction(lhs_num, lhs_den) < size ** q


def _size_lt_pow2(size: int, exp: Fraction) -> bool:
    p, q = exp.numerator, exp.denominator
    rhs = Fraction(2 ** p if p >= 0 else 1, 1 if p >= 0 else 2 ** (-p))
    return size ** q < rhs


@dataclass(frozen=True)
class PushforwardReport:
    checked: int
    counterexample: tuple | None
    mode: str  # "exhaustive" or "sampled"
    seed: int | None = None

    @property
    def ok(self) -> bool:
        return self.counterexample is None


def pushforward_pmf(pmf: Pmf, g: Mapping[Symbol, Symbol] | Callable) -> dict:
    """Distribution of g(X) for X ~ pmf."""
    pmf = _check_pmf(pmf)
    apply = g.__getitem__ if isinstance(g, Mapping) else g
    out: dict = {}
    for x, p in pmf.items():
        y = apply(x)
        out[y] = out.get(y, Fraction(0)) + p
    return out


def pushforward_typicality_check(
    pmf: Pmf,
    g: Mapping[Symbol, Symbol] | Callable,
    n: int,
    eps: Fraction,
    trials: int | None = None,
    seed: int | None = None,
    cap: int = ENUM_CAP,
) -> PushforwardReport:
    """Verify: x^n typical for X implies g(x^n) typical for Y = g(X).

    This is a theorem (a symbolwise map can only merge counts, and the
    relative-eps windows add up), so any counterexample returned means a
    bug in the typicality code, not new mathematics.  Exhaustive below
    ``cap``; otherwise samples ``trials`` typical sequences by rejection
    from the iid source, which requires a seed.
    """
    pmf = _check_pmf(pmf)
    eps = Fraction(eps)
    q = pushforward_pmf(pmf, g)
    apply = g.__getitem__ if isinstance(g, Mapping) else g

    support = sum(1 for p in pmf.values() if p > 0)
    if trials is None and support ** n > cap:
        raise SizeCapError(
            f"exhaustive pushforward check needs {support}^{n} sequences; "
            "pass trials= (with seed=) for sampled mode")

    checked = 0
    if trials is None:
        for xs in iter_typical(pmf, n, eps):
            checked += 1
            ys = tuple(apply(x) for x in xs)
            if not is_typical(ys, q, eps):
                return PushforwardReport(checked, xs, "exhaustive")
        return PushforwardReport(checked, None, "exhaustive")

    if seed is None:
        raise ValueError("sampled mode requires a seed")
    import random

    rng = random.Random(seed)
    symbols = [x for x in _sorted_symbols(pmf) if pmf[x] > 0]
    weights = [float(pmf[x]) for x in symbols]
    attempts = 0
    while checked < trials and attempts < trials * 10_000:
        attempts += 1
        xs = tuple(rng.choices(symbols, weights=weights, k=n))
        if not is_typical(xs, pmf, eps):
            continue
        checked += 1
        ys = tuple(apply(x) for x in xs)
        if not is_typical(ys, q, eps):
            return PushforwardReport(checked, xs, "sampled", seed)
    return PushforwardReport(checked, None, "sampled", seed)
