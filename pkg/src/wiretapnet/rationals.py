"""Helpers for exact rational values as they appear in files and reports.

Rationals travel through JSON as strings: either ``"p/q"`` or a plain
integer string.  Floats never silently masquerade as rationals; anything
that is not exactly representable is tagged ``approx`` by the callers.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable

import gmpy2


def parse_rational(text: str | int) -> Fraction:
    """Parse ``"p/q"`` or an integer string into a Fraction.

    Raises ValueError for floats, NaN-ish input or malformed strings; the
    file formats deliberately reject float literals for capacities and
    probabilities.
    """
    if isinstance(text, bool):
        raise ValueError("booleans are not rationals")
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise ValueError(f"expected rational string, got {type(text).__name__}")
    s = text.strip()
    if "." in s or "e" in s.lower():
        raise ValueError(f"float literals are not accepted for rationals: {text!r}")
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"malformed rational {text!r}: {exc}") from None


def format_rational(q: Fraction) -> str:
    """Inverse of parse_rational: ``"p/q"`` with q omitted when 1."""
    return str(Fraction(q))


def dyadic_log2(q: Fraction) -> int | None:
    """Return k when q == 2**k exactly, else None.

    Used to decide whether an entropy can be carried as an exact rational:
    -p*log2(p) is rational precisely when p is a power of two.
    """
    if q <= 0:
        return None
    num, den = q.numerator, q.denominator
    if num == 1:
        if den & (den - 1) == 0:
            return -(den.bit_length() - 1)
        return None
    if den == 1 and num & (num - 1) == 0:
        return num.bit_length() - 1
    return None


def log2_fraction(q: Fraction) -> float:
    """log2 of a positive Fraction without overflowing huge integers."""
    if q <= 0:
        raise ValueError("log2 of non-positive rational")
    num, den = q.numerator, q.denominator
    # math.log2 on ints is exact enough and handles bignums.
    return math.log2(num) - math.log2(den)


def ceil_fraction(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


def floor_fraction(q: Fraction) -> int:
    return q.numerator // q.denominator


LogTerms = Iterable[tuple[Fraction, Fraction]]

# Above this many estimated product bits the exact integer route is abandoned
# in favour of interval arithmetic.
_EXACT_BITS_CAP = 4_000_000
_INTERVAL_PRECISIONS = (128, 512, 2048, 8192, 32768)


def _merge_terms(terms: LogTerms) -> dict[Fraction, Fraction]:
    merged: dict[Fraction, Fraction] = {}
    for w, a in terms:
        w = Fraction(w)
        a = Fraction(a)
        if a <= 0:
            raise ValueError("log2 of non-positive value in weighted sum")
        if w == 0 or a == 1:
            continue
        merged[a] = merged.get(a, Fraction(0)) + w
    return {a: w for a, w in merged.items() if w != 0}


def _cmp_exact_powers(merged: dict[Fraction, Fraction], c: Fraction) -> int | None:
    """Sign of sum(w*log2 a) - c by integer power comparison, or None if too big."""
    scale = c.denominator
    for w in merged.values():
        scale = scale * w.denominator // math.gcd(scale, w.denominator)
    bits = 0
    pows = []
    for a, w in merged.items():
        n = int(w * scale)
        bits += abs(n) * (a.numerator.bit_length() + a.denominator.bit_length())
        if bits > _EXACT_BITS_CAP:
            return None
        pows.append((a, n))
    k = int(c * scale)
    # sum n_i log2 a_i  vs  k   <=>   prod a_i^{n_i}  vs  2^k
    lhs_num = gmpy2.mpz(1)
    lhs_den = gmpy2.mpz(1)
    for a, n in pows:
        if n >= 0:
            lhs_num *= gmpy2.mpz(a.numerator) ** n
            lhs_den *= gmpy2.mpz(a.denominator) ** n
        else:
            lhs_num *= gmpy2.mpz(a.denominator) ** (-n)
            lhs_den *= gmpy2.mpz(a.numerator) ** (-n)
    if k >= 0:
        lhs_den <<= k
    else:
        lhs_num <<= -k
    return (lhs_num > lhs_den) - (lhs_num < lhs_den)


def _interval_log2_sum(merged: dict[Fraction, Fraction], prec: int):
    """Directed-rounding lower/upper bounds for sum(w*log2 a), w > 0."""
    down = gmpy2.context(precision=prec, round=gmpy2.RoundDown)
    up = gmpy2.context(precision=prec, round=gmpy2.RoundUp)
    lo = gmpy2.mpfr(0)
    hi = gmpy2.mpfr(0)
    for a, w in merged.items():
        wq = gmpy2.mpq(w.numerator, w.denominator)
        num = gmpy2.mpz(a.numerator)
        den = gmpy2.mpz(a.denominator)
        # lower bound of log2(num/den): round num's log down, den's log up
        term_lo = down.sub(down.log2(num), up.log2(den))
        term_hi = up.sub(up.log2(num), down.log2(den))
        lo = down.add(lo, down.mul(wq, term_lo))
        hi = up.add(hi, up.mul(wq, term_hi))
    return lo, hi


def cmp_log2_sum(terms: LogTerms, bound: Fraction | int = 0) -> int:
    """Sign of sum(w * log2(a) for (w, a) in terms) - bound, computed reliably.

    Strategy: merge terms by value and strip dyadic values into an exact
    rational accumulator; if irrational terms remain, try an exact integer
    power comparison, falling back to interval arithmetic with outward
    rounding at escalating precision.  Only returns when the answer is
    certain; exact ties are caught by the merge/dyadic reductions.
    """
    bound = Fraction(bound)
    merged = _merge_terms(terms)
    acc = Fraction(0)
    rest: dict[Fraction, Fraction] = {}
    for a, w in merged.items():
        k = dyadic_log2(a)
        if k is not None:
            acc += w * k
        elif w > 0:
            rest[a] = rest.get(a, Fraction(0)) + w
        else:
            # flip to positive weight so interval bounds stay monotone
            inv = 1 / a
            rest[inv] = rest.get(inv, Fraction(0)) + (-w)
    rest = {a: w for a, w in rest.items() if w != 0}
    c = bound - acc
    if not rest:
        return (c < 0) - (c > 0)
    sign = _cmp_exact_powers(rest, c)
    if sign is not None:
        return sign
    cq = gmpy2.mpq(c.numerator, c.denominator)
    for prec in _INTERVAL_PRECISIONS:
        lo, hi = _interval_log2_sum(rest, prec)
        if lo > cq:
            return 1
        if hi < cq:
            return -1
    raise ArithmeticError(
        "cannot certify comparison of weighted log2 sum against "
        f"{bound}: interval still straddles at {_INTERVAL_PRECISIONS[-1]} bits"
    )


def log2_sum_value(terms: LogTerms) -> Fraction | float:
    """Value of sum(w*log2 a): exact Fraction when every value is dyadic."""
    merged = _merge_terms(terms)
    acc = Fraction(0)
    rest = []
    for a, w in merged.items():
        k = dyadic_log2(a)
        if k is not None:
            acc += w * k
        else:
            rest.append((w, a))
    if not rest:
        return acc
    return float(acc) + math.fsum(float(w) * log2_fraction(a) for w, a in rest)


def floor_log2_sum(terms: LogTerms, scale: Fraction | int = 1) -> int:
    """Exact floor(scale * sum(w*log2 a)) via certified comparisons."""
    scale = Fraction(scale)
    scaled = [(w * scale, a) for w, a in terms]
    guess = math.floor(float(log2_sum_value(scaled)))
    # walk to the certified floor; float error is at most a few ulps
    while cmp_log2_sum(scaled, guess) < 0:
        guess -= 1
    while cmp_log2_sum(scaled, guess + 1) >= 0:
        guess += 1
    return guess


def ceil_log2_sum(terms: LogTerms, scale: Fraction | int = 1) -> int:
    """Exact ceil(scale * sum(w*log2 a))."""
    scale = Fraction(scale)
    scaled = [(w * scale, a) for w, a in terms]
    sign = cmp_log2_sum(scaled, 0)
    if sign == 0:
        return 0
    return -floor_log2_sum([(-w, a) for w, a in scaled])
