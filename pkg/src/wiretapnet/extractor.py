"""Seeded randomness extraction: min-entropy tools and a Toeplitz hash.

The extractor maps an n1-bit input and an n2-bit seed to n3 output bits,
where n2 = n1 + n3 - 1.  The seed defines a binary Toeplitz matrix by
sliding windows: output bit i is the parity of t AND seed[i : i + n1],
with bit 0 the least significant.  Toeplitz hashing is 2-universal, so
the leftover hash lemma makes it a (delta', eps')-extractor once the
output length obeys n3 = floor(delta' * n1 - 2*log2(1/eps')) - c.

Inputs, seeds and outputs travel as plain ints (bit-packed, LSB first).
The exhaustive evaluation helpers vectorize over every seed with 16-bit
parity lookup tables; they exist to certify small instances exactly, not
to run at production sizes.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .rationals import cmp_log2_sum, dyadic_log2, floor_log2_sum, log2_fraction

# Elements processed by the all-seed evaluators: 2^n2 * len(support).
EVAL_CAP = 1 << 26


class SizeCapError(Exception):
    """An exhaustive evaluation would exceed its configured cap."""


def _check_pmf(pmf: Mapping) -> dict:
    out = {}
    total = Fraction(0)
    for x, p in pmf.items():
        p = Fraction(p)
        if p < 0:
            raise ValueError(f"negative probability for {x!r}")
        total += p
        if p > 0:
            out[x] = p
    if total != 1:
        raise ValueError(f"pmf sums to {total}, not 1")
    if not out:
        raise ValueError("pmf has empty support")
    return out


def min_entropy(pmf: Mapping) -> Fraction | float:
    """-log2 of the largest point mass; exact Fraction when that mass is dyadic."""
    support = _check_pmf(pmf)
    top = max(support.values())
    k = dyadic_log2(top)
    if k is not None:
        return Fraction(-k)
    return -log2_fraction(top)


def min_entropy_drop_test(
    joint: Mapping,
    lam: Fraction | int,
    mode: str = "exhaustive",
    trials: int | None = None,
    seed: int | None = None,
) -> Fraction:
    """Frequency of {H_inf(X) - H_inf(X|Y=y) <= log2|Y| + lam} under p(y).

    ``joint`` maps (x, y) pairs to probabilities.  |Y| counts the distinct
    second coordinates appearing as keys, including zero-probability ones.
    The per-y event is decided by the exact rational comparison
    max_x p(x|y) <= max_x p(x) * |Y| * 2^lam.

    Exhaustive mode weights outcomes by p(y) exactly and raises if the
    frequency falls below 1 - 2^(-lam), which would contradict the Markov
    argument behind the bound.  Sampled mode draws y values and reports the
    empirical fraction without asserting.
    """
    lam = Fraction(lam)
    if lam <= 0:
        raise ValueError("lam must be positive")
    support = _check_pmf(joint)
    ys = {y for _, y in joint.keys()}
    y_size = len(ys)
    p_x: dict = {}
    p_y: dict = {}
    for (x, y), p in support.items():
        p_x[x] = p_x.get(x, Fraction(0)) + p
        p_y[y] = p_y.get(y, Fraction(0)) + p
    top_x = max(p_x.values())

    def passes(y) -> bool:
        py = p_y[y]
        top_cond = max(p for (x2, y2), p in support.items() if y2 == y) / py
        ratio = top_cond / (top_x * y_size)
        if lam.denominator == 1:
            return ratio <= Fraction(2) ** lam
        return cmp_log2_sum([(Fraction(1), ratio)], lam) <= 0

    if mode == "exhaustive":
        freq = sum((p_y[y] for y in p_y if passes(y)), Fraction(0))
        floor_freq = 1 - Fraction(2) ** lam if lam.denominator == 1 else None
        short = 1 - freq
        ok = short == 0 or cmp_log2_sum([(Fraction(1), short)], -lam) <= 0
        if not ok:
            raise RuntimeError(
                f"min-entropy drop frequency {freq} fell below 1 - 2^-{lam}"
                + (f" = {floor_freq}" if floor_freq is not None else "")
            )
        return freq
    if mode == "sampled":
        if not trials or trials < 1 or seed is None:
            raise ValueError("sampled mode needs trials >= 1 and a seed")
        rng = random.Random(seed)
        ys_list = sorted(p_y.keys(), key=repr)
        weights = [float(p_y[y]) for y in ys_list]
        hits = sum(passes(y) for y in rng.choices(ys_list, weights, k=trials))
        return Fraction(hits, trials)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class Extractor:
    """Toeplitz extractor instance; seeds have length n2 = n1 + n3 - 1.

    delta_p and eps_p record the (min-entropy rate, closeness) pair the
    lengths were sized for; they are None when the caller sized n3 from an
    explicit entropy budget instead.
    """

    n1: int
    n2: int
    n3: int
    delta_p: Fraction | None = None
    eps_p: Fraction | None = None
    c: int = 0

    def __post_init__(self):
        if self.n1 < 1 or self.n3 < 1:
            raise ValueError("extractor lengths must be at least 1")
        if self.n2 != self.n1 + self.n3 - 1:
            raise ValueError("Toeplitz seed length must be n1 + n3 - 1")


def make_extractor(n1: int, delta_p, eps_p, c: int = 0) -> Extractor:
    """Size a Toeplitz extractor for min-entropy rate delta' and closeness eps'.

    n3 = floor(delta' * n1 - 2*log2(1/eps')) - c, evaluated exactly for
    rational parameters.  Raises with the formula echoed when n3 < 1.
    """
    delta_p = Fraction(delta_p)
    eps_p = Fraction(eps_p)
    if not 0 < delta_p <= 1:
        raise ValueError("delta' must lie in (0, 1]")
    if not 0 < eps_p < 1:
        raise ValueError("eps' must lie in (0, 1)")
    n3 = floor_log2_sum([(delta_p * n1, Fraction(2)), (Fraction(2), eps_p)]) - c
    if n3 < 1:
        raise ValueError(
            f"n3 = floor(delta'*n1 - 2*log2(1/eps')) - c = "
            f"floor({delta_p}*{n1} - 2*log2({1 / eps_p})) - {c} = {n3} < 1; "
            "increase n1 or relax eps'"
        )
    return Extractor(n1=n1, n2=n1 + n3 - 1, n3=n3, delta_p=delta_p, eps_p=eps_p, c=c)


def extract(ex: Extractor, t: int, v: int) -> int:
    """Apply the Toeplitz hash: bit i of the result is parity(t & v[i:i+n1])."""
    if not 0 <= t < (1 << ex.n1):
        raise ValueError(f"input must fit in {ex.n1} bits")
    if not 0 <= v < (1 << ex.n2):
        raise ValueError(f"seed must fit in {ex.n2} bits")
    mask = (1 << ex.n1) - 1
    out = 0
    for i in range(ex.n3):
        out |= (((v >> i) & mask & t).bit_count() & 1) << i
    return out


_PARITY: np.ndarray | None = None


def _parity_table() -> np.ndarray:
    global _PARITY
    if _PARITY is None:
        x = np.arange(1 << 16, dtype=np.uint32)
        x ^= x >> 8
        x ^= x >> 4
        x ^= x >> 2
        x ^= x >> 1
        _PARITY = (x & 1).astype(np.uint8)
    return _PARITY


def _parity_and(a: np.ndarray, b: np.ndarray, width: int) -> np.ndarray:
    par = _parity_table()
    prod = (a & b).astype(np.uint64)
    out = par[(prod & 0xFFFF).astype(np.uint32)]
    if width > 16:
        out ^= par[((prod >> 16) & 0xFFFF).astype(np.uint32)]
    if width > 32:
        raise SizeCapError("vectorized evaluation supports n1 <= 32")
    return out


def all_seed_outputs(ex: Extractor, support: Iterable[int], cap: int = EVAL_CAP) -> np.ndarray:
    """Matrix of extractor outputs over every seed (rows) and input (columns)."""
    ts = np.asarray(sorted(set(support)), dtype=np.uint64)
    if ts.size == 0:
        raise ValueError("empty support")
    if int(ts.max()) >= 1 << ex.n1:
        raise ValueError(f"support element exceeds {ex.n1} bits")
    n_seeds = 1 << ex.n2
    if n_seeds * ts.size > cap:
        raise SizeCapError(
            f"all-seed evaluation needs {n_seeds} x {ts.size} cells, cap is {cap}"
        )
    seeds = np.arange(n_seeds, dtype=np.uint64)
    mask = np.uint64((1 << ex.n1) - 1)
    out = np.zeros((n_seeds, ts.size), dtype=np.uint32)
    for i in range(ex.n3):
        windows = (seeds >> np.uint64(i)) & mask
        out |= _parity_and(windows[:, None], ts[None, :], ex.n1).astype(np.uint32) << i
    return out


def _seed_output_counts(ex: Extractor, support: Iterable[int], cap: int) -> np.ndarray:
    outs = all_seed_outputs(ex, support, cap)
    n_seeds = outs.shape[0]
    flat = outs.astype(np.int64) + (np.arange(n_seeds, dtype=np.int64)[:, None] << ex.n3)
    counts = np.bincount(flat.ravel(), minlength=n_seeds << ex.n3)
    return counts.reshape(n_seeds, 1 << ex.n3)


def extraction_distance(ex: Extractor, support: Iterable[int], cap: int = EVAL_CAP) -> Fraction:
    """Exact d_TV([V, E(T, V)], uniform) for T flat on ``support``.

    V is uniform over all 2^n2 seeds and the reference is uniform over
    n2 + n3 bits, matching the strong-extraction requirement that output
    and seed be jointly near-uniform.
    """
    counts = _seed_output_counts(ex, support, cap)
    size = int(counts[0].sum())
    diffs = np.abs(counts * (1 << ex.n3) - size)
    total = int(diffs.sum(dtype=np.int64))
    return Fraction(total, 2 * size * (1 << (ex.n2 + ex.n3)))


def extraction_conditional_entropy(ex: Extractor, support: Iterable[int], cap: int = EVAL_CAP) -> float:
    """H(E(T, V) | V) in bits for T flat on ``support``, averaged over seeds."""
    counts = _seed_output_counts(ex, support, cap)
    size = counts[0].sum()
    nz = counts[counts > 0].astype(np.float64)
    h_sum = math.log2(size) * nz.sum() / size - float((nz * np.log2(nz)).sum()) / size
    return h_sum / counts.shape[0]


def binary_entropy(p) -> float:
    p = float(p)
    if not 0 <= p <= 1:
        raise ValueError("probability out of range")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def total_variation(p: Mapping, q: Mapping) -> Fraction:
    """d_TV between two pmfs over hashable points, exact."""
    keys = set(p) | set(q)
    return sum(
        (abs(Fraction(p.get(k, 0)) - Fraction(q.get(k, 0))) for k in keys),
        Fraction(0),
    ) / 2


def maximal_coupling(p: Mapping, q: Mapping) -> dict:
    """Joint pmf over (x, y) with marginals p, q and P(X != Y) = d_TV(p, q).

    Mass min(p, q) sits on the diagonal; the leftover masses couple as a
    product of the normalized residuals.
    """
    p = _check_pmf(p)
    q = _check_pmf(q)
    joint: dict = {}
    overlap = Fraction(0)
    for x in set(p) | set(q):
        m = min(p.get(x, Fraction(0)), q.get(x, Fraction(0)))
        if m > 0:
            joint[(x, x)] = m
            overlap += m
    gap = 1 - overlap
    if gap == 0:
        return joint
    for x in p:
        rx = p[x] - min(p[x], q.get(x, Fraction(0)))
        if rx == 0:
            continue
        for y in q:
            ry = q[y] - min(q[y], p.get(y, Fraction(0)))
            if ry == 0:
                continue
            joint[(x, y)] = joint.get((x, y), Fraction(0)) + rx * ry / gap
    return joint


def coupling_mismatch(joint: Mapping) -> Fraction:
    """P(X != Y) under a coupling given as a joint pmf over pairs."""
    return sum((Fraction(p) for (x, y), p in joint.items() if x != y), Fraction(0))
