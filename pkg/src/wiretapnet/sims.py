"""Simulators for the typicality-based random code constructions.

Both simulators lift a blocklength-one code to blocklength n_t: every
source draws its message and key sequence uniformly from the typical
sets of the corresponding single-letter marginals, and edge maps apply
symbol by symbol.  The variable-length (zero-error) simulator always
forwards the resulting edge sequence and budgets capacity against the
exact block entropy, H(W_e) <= n*c_e.  The fixed-length (asymptotic)
simulator forwards an edge sequence only when a local joint-typicality
gate passes and a sentinel otherwise, decodes by first-match joint
typicality, and budgets capacity by alphabet size, log2(|T|+1) <= n*c_e.

Exact distribution work runs over joint symbol-count types rather than
sequences: a uniform draw from the codebook product is the uniform
distribution over input tuple sequences whose per-source marginal types
are typical, so the probability of any symbolwise pushforward value
depends only on its pushed type.  Atypicality probabilities, block
entropies and leakage all come out of one pass over those types.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from math import comb

from . import typicality
from .codes import CodeSpec, domain_edges, edge_processing_order, log2_size, validate_code
from .entropy import SizeCapError, entropy_bits
from .network import Network, validate
from .rationals import ceil_fraction, dyadic_log2, log2_fraction

TYPE_CAP = 1 << 22
DRAW_CAP = 1 << 22


def _log2_any(q: Fraction) -> "Fraction | float":
    k = dyadic_log2(q)
    return Fraction(k) if k is not None else log2_fraction(q)


def _ceil_any(x) -> int:
    return ceil_fraction(x) if isinstance(x, Fraction) else math.ceil(x)


@dataclass(frozen=True)
class RvSystem:
    """A blocklength-one code plus input statistics, declared with a
    scaling factor ``a`` and capacity slack ``eps_k``: the single-letter
    point must satisfy a*H(W_e) <= c_e + eps_k on every edge."""

    net: Network
    code: CodeSpec
    source_pmfs: tuple[tuple[str, tuple[tuple[tuple[int, int], Fraction], ...]], ...]
    a: Fraction
    eps_k: Fraction

    @staticmethod
    def make(net: Network, code: CodeSpec, source_pmfs=None,
             a=Fraction(1), eps_k=Fraction(0)) -> "RvSystem":
        report = validate(net)
        if not report.ok:
            raise ValueError("; ".join(f"{rule}: {detail}" for rule, detail in report.violations))
        validate_code(net, code, require_decoders=False)
        a, eps_k = Fraction(a), Fraction(eps_k)
        if a <= 0 or eps_k < 0:
            raise ValueError("need a > 0 and eps_k >= 0")
        msg, key = dict(code.msg_sizes), dict(code.key_sizes)
        canon = []
        for s in sorted(net.sources):
            if source_pmfs is None or s not in source_pmfs:
                p = Fraction(1, msg[s] * key[s])
                pmf = tuple(((m, k), p) for m in range(msg[s]) for k in range(key[s]))
            else:
                raw = source_pmfs[s]
                pmf = tuple(sorted(((m, k), Fraction(v)) for (m, k), v in raw.items()))
                if any(v < 0 for _, v in pmf) or sum(v for _, v in pmf) != 1:
                    raise ValueError(f"source pmf of {s!r} is not a distribution")
                if any(not (0 <= m < msg[s] and 0 <= k < key[s]) for (m, k), _ in pmf):
                    raise ValueError(f"source pmf of {s!r} has out-of-range symbols")
            canon.append((s, pmf))
        rv = RvSystem(net, code, tuple(canon), a, eps_k)
        _validate_point(rv, _single_letter(rv))
        return rv

    def pair_pmf(self, s: str) -> dict:
        return dict(dict(self.source_pmfs)[s])


@dataclass(frozen=True, eq=False)
class _Letter:
    """Single-letter structure: positive-probability input cells, their
    probabilities, and every symbolwise projection the sims need."""

    srcs: tuple[str, ...]
    pair_pmfs: dict
    m_pmfs: dict
    k_pmfs: dict
    cells: tuple
    cell_probs: tuple
    edge_vals: dict
    m_proj: tuple
    edge_pmfs: dict


def _marginals(pmf: dict) -> tuple[dict, dict]:
    m_pmf: dict = {}
    k_pmf: dict = {}
    for (m, k), p in pmf.items():
        m_pmf[m] = m_pmf.get(m, Fraction(0)) + p
        k_pmf[k] = k_pmf.get(k, Fraction(0)) + p
    return m_pmf, k_pmf


def _single_letter(rv: RvSystem) -> _Letter:
    net, code = rv.net, rv.code
    key = dict(code.key_sizes)
    alph, tabs = dict(code.edge_alphabets), dict(code.edge_tables)
    srcs = tuple(sorted(net.sources))
    pair_pmfs = {s: rv.pair_pmf(s) for s in srcs}
    m_pmfs, k_pmfs = {}, {}
    for s in srcs:
        m_pmfs[s], k_pmfs[s] = _marginals(pair_pmfs[s])

    order = edge_processing_order(net)
    doms = {e.id: [x.id for x in domain_edges(net, e)] for e in order}
    positive = [sorted(mk for mk, p in pair_pmfs[s].items() if p > 0) for s in srcs]

    cells, probs, m_proj = [], [], []
    edge_vals: dict[str, list] = {e.id: [] for e in net.edges}
    for cell in itertools.product(*positive):
        values: dict[str, int] = {}
        prob = Fraction(1)
        for s, (m, k) in zip(srcs, cell):
            values[f"m:{s}"] = m
            values[f"k:{s}"] = k
            prob *= pair_pmfs[s][(m, k)]
        for e in order:
            if e.tail in net.sources:
                idx = values[f"m:{e.tail}"] * key[e.tail] + values[f"k:{e.tail}"]
            else:
                idx = 0
                for x in doms[e.id]:
                    idx = idx * alph[x] + values[f"e:{x}"]
            values[f"e:{e.id}"] = tabs[e.id][idx]
        cells.append(cell)
        probs.append(prob)
        m_proj.append(tuple(mk[0] for mk in cell))
        for e in net.edges:
            edge_vals[e.id].append(values[f"e:{e.id}"])

    edge_pmfs: dict[str, dict] = {}
    for e in net.edges:
        pmf: dict = {}
        for v, p in zip(edge_vals[e.id], probs):
            pmf[v] = pmf.get(v, Fraction(0)) + p
        edge_pmfs[e.id] = pmf
    return _Letter(srcs, pair_pmfs, m_pmfs, k_pmfs, tuple(cells), tuple(probs),
                   {e: tuple(v) for e, v in edge_vals.items()}, tuple(m_proj), edge_pmfs)


def _validate_point(rv: RvSystem, letter: _Letter) -> None:
    for s in letter.srcs:
        m_pmf, k_pmf = letter.m_pmfs[s], letter.k_pmfs[s]
        for (m, k), p in letter.pair_pmfs[s].items():
            if p != m_pmf[m] * k_pmf[k]:
                raise ValueError(
                    f"message and key of source {s!r} must be independent")
    for e in rv.net.edges:
        h = entropy_bits(letter.edge_pmfs[e.id])
        slack = 1e-9 if isinstance(h, float) else 0
        if rv.a * h > e.cap + rv.eps_k + slack:
            raise ValueError(
                f"edge {e.id!r}: a*H(W_e) = {float(rv.a * h):.6g} exceeds "
                f"c_e + eps_k = {float(e.cap + rv.eps_k):.6g}")


# ---------------------------------------------------------------------------
# joint symbol-count types


def _count_window(n: int, eps: Fraction, p: Fraction) -> tuple[int, int]:
    # |c - n p| <= n eps p, as an integer interval
    lo = ceil_fraction(n * p * (1 - eps))
    hi = n * p * (1 + eps)
    return lo, min(n, hi.numerator // hi.denominator)


def _joint_types(letter: _Letter, n_t: int, eps: Fraction, cap: int = TYPE_CAP):
    """All joint count vectors over input cells whose per-source message
    and key marginal types are typical, with their multinomial weights."""
    coords: list[tuple] = []          # (source index, which marginal, value)
    windows: list[tuple[int, int]] = []
    index: dict[tuple, int] = {}
    for si, s in enumerate(letter.srcs):
        for kind, pmf in (("m", letter.m_pmfs[s]), ("k", letter.k_pmfs[s])):
            for v, p in sorted(pmf.items()):
                if p > 0:
                    index[(si, kind, v)] = len(coords)
                    coords.append((si, kind, v))
                    windows.append(_count_window(n_t, eps, p))
    cell_coords = []
    for cell in letter.cells:
        refs = []
        for si, (m, k) in enumerate(cell):
            refs.append(index[(si, "m", m)])
            refs.append(index[(si, "k", k)])
        cell_coords.append(tuple(refs))

    ncells = len(letter.cells)
    out: list[tuple[tuple[int, ...], int]] = []
    counts = [0] * ncells
    marg = [0] * len(coords)
    visits = 0

    def rec(i: int, rest: int, weight: int) -> None:
        nonlocal visits
        visits += 1
        if visits > cap:
            raise SizeCapError(f"joint type enumeration exceeded cap {cap}")
        if i == ncells - 1:
            counts[i] = rest
            for ref in cell_coords[i]:
                marg[ref] += rest
            if all(lo <= marg[j] <= hi for j, (lo, hi) in enumerate(windows)):
                out.append((tuple(counts), weight))
            for ref in cell_coords[i]:
                marg[ref] -= rest
            return
        for c in range(rest + 1):
            counts[i] = c
            ok = True
            for ref in cell_coords[i]:
                marg[ref] += c
                if marg[ref] > windows[ref][1]:
                    ok = False
            if ok:
                rec(i + 1, rest - c, weight * comb(rest, c))
            for ref in cell_coords[i]:
                marg[ref] -= c
        counts[i] = 0

    rec(0, n_t, 1)
    return out


def _push_type(counts, vals) -> tuple:
    out: dict = {}
    for c, v in zip(counts, vals):
        if c:
            out[v] = out.get(v, 0) + c
    return tuple(sorted(out.items()))


def _multinomial(n: int, counts) -> int:
    w, rest = 1, n
    for c in counts:
        w *= comb(rest, c)
        rest -= c
    return w


def _entropy_of_classes(buckets: dict, n: int, total: int) -> "Fraction | float":
    # H = sum over type classes of q * log2(mult/q), q = weight/total
    acc: "Fraction | float" = Fraction(0)
    for tau, w in buckets.items():
        mult = _multinomial(n, [c for _, c in tau])
        acc = acc + Fraction(w, total) * _log2_any(Fraction(mult * total, w))
    return acc


def _entropy_of_counts(counts: dict, total: int) -> "Fraction | float":
    acc: "Fraction | float" = Fraction(0)
    for c in counts.values():
        acc = acc + Fraction(c, total) * _log2_any(Fraction(total, c))
    return acc


def _pushed_typical(pushed: tuple, pmf: dict, n: int, eps: Fraction) -> bool:
    d = dict(pushed)
    for x, p in pmf.items():
        c = d.get(x, 0)
        if p == 0:
            if c:
                return False
        elif abs(Fraction(c) - n * p) > n * eps * p:
            return False
    return True


# ---------------------------------------------------------------------------
# shared report pieces


@dataclass(frozen=True)
class EdgeCapacityCheck:
    edge: str
    used_bits: "Fraction | float"
    budget_bits: "Fraction | float"
    ok: bool
    kind: str  # "block-entropy" or "alphabet"


@dataclass(frozen=True)
class LeakageEntry:
    wiretap: str
    total_bits: "Fraction | float"
    per_symbol: "Fraction | float"
    bound_per_symbol: "Fraction | float | None"
    within_bound: "bool | None"


@dataclass(frozen=True)
class RateEntry:
    source: str
    rate_bits: "Fraction | float"
    analytic_lower_bound: "Fraction | float | None"
    bound_valid: bool


def _books(letter: _Letter, n_t: int, eps: Fraction):
    books = []
    for s in letter.srcs:
        m_book = tuple(typicality.typical_set(letter.m_pmfs[s], n_t, eps))
        k_book = tuple(typicality.typical_set(letter.k_pmfs[s], n_t, eps))
        for label, book in ((f"message of {s}", m_book), (f"key of {s}", k_book)):
            if not book:
                raise ValueError(
                    f"typical codebook for {label} is empty at n_t={n_t}, "
                    f"eps={eps}: increase n_t or eps")
        books.append((s, m_book, k_book))
    return tuple(books)


def _rate_entries(letter: _Letter, books, n_t: int, eps: Fraction, n: int):
    entries = []
    for s, m_book, _ in books:
        rate = log2_size(len(m_book)) / n
        h_m = entropy_bits(letter.m_pmfs[s])
        if eps < 1:
            bound = (Fraction(n_t, n) * (1 - eps) * h_m
                     + _log2_any(Fraction(1) - eps) / n)
            valid = typicality.lower_size_bound_holds(letter.m_pmfs[s], n_t, eps)
        else:
            bound, valid = None, False
        entries.append(RateEntry(s, rate, bound, valid))
    return tuple(entries)


def _draw_space(books):
    per_source = [len(mb) * len(kb) for _, mb, kb in books]
    return math.prod(per_source)


def _iter_draws(books):
    # tuples of (m_seq, k_seq) per source, in deterministic order
    spaces = [tuple(itertools.product(mb, kb)) for _, mb, kb in books]
    yield from itertools.product(*spaces)


def _sample_draws(books, trials: int, seed: int):
    rng = random.Random(seed)
    for _ in range(trials):
        yield tuple((mb[rng.randrange(len(mb))], kb[rng.randrange(len(kb))])
                    for _, mb, kb in books)


def _edge_sequences(net: Network, code: CodeSpec, letter: _Letter, n_t: int, draw):
    """Symbolwise edge evaluation for one draw; no typicality gating."""
    key = dict(code.key_sizes)
    alph, tabs = dict(code.edge_alphabets), dict(code.edge_tables)
    seqs: dict[str, tuple] = {}
    by_src = dict(zip(letter.srcs, draw))
    for e in edge_processing_order(net):
        if e.tail in net.sources:
            m_seq, k_seq = by_src[e.tail]
            tab, ks = tabs[e.id], key[e.tail]
            seqs[e.id] = tuple(tab[m * ks + k] for m, k in zip(m_seq, k_seq))
        else:
            ins = [seqs[x.id] for x in domain_edges(net, e)]
            alphs = [alph[x.id] for x in domain_edges(net, e)]
            tab = tabs[e.id]
            vals = []
            for i in range(n_t):
                idx = 0
                for seq, a in zip(ins, alphs):
                    idx = idx * a + seq[i]
                vals.append(tab[idx])
            seqs[e.id] = tuple(vals)
    return seqs


# ---------------------------------------------------------------------------
# variable-length (zero-error) simulator


@dataclass(frozen=True, eq=False)
class SimCode:
    rv: RvSystem
    n_t: int
    eps: Fraction
    books: tuple
    n: int
    delta: "Fraction | float"
    p_atypical: tuple[tuple[str, "Fraction | float"], ...]
    atypical_estimated: bool
    types: "tuple | None"
    letter: _Letter


def build_zero_error_sim(rv: RvSystem, n_t: int, eps) -> SimCode:
    """Materialize codebooks and size the variable-length block code.

    The blocklength is n = ceil(n_t (1+delta) / a) where delta pads for
    typical-set overshoot and for the atypical-sequence mass on each
    edge.  P(edge sequence atypical) is computed exactly over joint
    types; past the enumeration cap it degrades to a flagged Hoeffding
    style estimate that assumes independent symbols.
    """
    eps = Fraction(eps)
    if n_t < 1 or eps <= 0:
        raise ValueError("need n_t >= 1 and eps > 0")
    letter = _single_letter(rv)
    books = _books(letter, n_t, eps)

    estimated = False
    try:
        types = _joint_types(letter, n_t, eps)
        total = sum(w for _, w in types)
        if total != _draw_space(books):
            raise RuntimeError("joint type weights disagree with the codebook "
                               "product size; type enumeration is unsound")
    except SizeCapError:
        types, estimated = None, True

    p_atyp = []
    for e in rv.net.edges:
        pmf = letter.edge_pmfs[e.id]
        if types is not None:
            bad = sum(w for counts, w in types
                      if not _pushed_typical(_push_type(counts, letter.edge_vals[e.id]),
                                             pmf, n_t, eps))
            p_atyp.append((e.id, Fraction(bad, total)))
        else:
            est = sum(2 * math.exp(-2 * n_t * float(eps * p) ** 2)
                      for p in pmf.values() if p > 0)
            p_atyp.append((e.id, min(1.0, est)))

    worst: "Fraction | float" = Fraction(0)
    for e in rv.net.edges:
        term = ((1 + eps) * (1 + rv.eps_k / e.cap)
                + rv.a * log2_size(dict(rv.code.edge_alphabets)[e.id])
                * dict(p_atyp)[e.id] / e.cap)
        worst = max(worst, term)
    delta = 2 * (worst - 1)
    n = _ceil_any(n_t * (1 + delta) / rv.a)
    return SimCode(rv, n_t, eps, books, n, delta, tuple(p_atyp), estimated,
                   tuple(types) if types is not None else None, letter)


@dataclass(frozen=True)
class ZeroErrorReport:
    mode: str
    trials: "int | None"
    seed: "int | None"
    n: int
    delta: "Fraction | float"
    codebook_sizes: tuple[tuple[str, int, int], ...]
    p_atypical: tuple[tuple[str, "Fraction | float"], ...]
    errors: tuple[tuple[tuple[str, str], "Fraction | float"], ...]
    capacity: tuple[EdgeCapacityCheck, ...]
    leakage: tuple[LeakageEntry, ...]
    rates: tuple[RateEntry, ...]
    notes: tuple[str, ...]


def _decode_fns(letter: _Letter, net: Network, code: CodeSpec):
    """Per (sink, source) symbolwise decoders: the code's table when
    present, else smallest message consistent with the single-letter
    joint (so an undecodable system yields errors, not an exception)."""
    alph = dict(code.edge_alphabets)
    decs = dict(code.decoders)
    fns = {}
    for t in net.sinks:
        ins = [e.id for e in sorted(net.in_edges(t.node), key=lambda e: e.id)]
        alphs = [alph[e] for e in ins]
        for s in t.beta:
            if (t.node, s) in decs:
                tab = decs[(t.node, s)]

                def from_table(w, tab=tab, alphs=alphs):
                    idx = 0
                    for v, a in zip(w, alphs):
                        idx = idx * a + v
                    return tab[idx]

                fns[(t.node, s)] = from_table
            else:
                si = letter.srcs.index(s)
                best: dict = {}
                for ci in range(len(letter.cells)):
                    w = tuple(letter.edge_vals[e][ci] for e in ins)
                    m = letter.cells[ci][si][0]
                    if w not in best or m < best[w]:
                        best[w] = m
                fns[(t.node, s)] = lambda w, best=best: best.get(w)
    return fns, {t.node: [e.id for e in sorted(net.in_edges(t.node), key=lambda e: e.id)]
                 for t in net.sinks}


def run_zero_error_sim(sim: SimCode, mode: str = "exhaustive",
                       trials: "int | None" = None,
                       seed: "int | None" = None) -> ZeroErrorReport:
    """Exact or sampled metrics for a built variable-length simulation.

    Decoding applies the blocklength-one decoder symbol by symbol; a
    block error is any position decoded wrong.  Leakage and block
    entropies are exact whenever the joint types are available, whatever
    the run mode; estimates are flagged in notes.
    """
    rv, letter, n_t, eps, n = sim.rv, sim.letter, sim.n_t, sim.eps, sim.n
    net = rv.net
    notes: list[str] = []
    if mode not in ("exhaustive", "montecarlo"):
        raise ValueError("mode must be exhaustive or montecarlo")
    if mode == "montecarlo":
        if not trials or trials < 1:
            raise ValueError("montecarlo mode needs trials >= 1")
        if seed is None:
            raise ValueError("montecarlo mode needs a seed for reproducibility")

    fns, in_ids = _decode_fns(letter, net, rv.code)
    total = _draw_space(sim.books)
    if mode == "exhaustive":
        if total > DRAW_CAP:
            raise SizeCapError(
                f"exhaustive run would enumerate {total} draws (cap {DRAW_CAP}); "
                "use montecarlo mode")
        draws = _iter_draws(sim.books)
        denom = total
    else:
        draws = _sample_draws(sim.books, trials, seed)
        denom = trials

    err_counts = {(t.node, s): 0 for t in net.sinks for s in t.beta}
    sample_counts: "dict | None" = None
    if sim.types is None:
        sample_counts = {"edge": {e.id: {} for e in net.edges}, "alpha": {}, "m": {}}
        for alpha in net.wiretap_sets:
            sample_counts["alpha"][alpha] = ({}, {})  # (obs, joint with m)

    by_src_order = letter.srcs
    for draw in draws:
        seqs = _edge_sequences(net, rv.code, letter, n_t, draw)
        for t in net.sinks:
            ins = in_ids[t.node]
            received = [seqs[e] for e in ins]
            for s in t.beta:
                fn = fns[(t.node, s)]
                m_seq = draw[by_src_order.index(s)][0]
                if any(fn(tuple(seq[i] for seq in received)) != m_seq[i]
                       for i in range(n_t)):
                    err_counts[(t.node, s)] += 1
        if sample_counts is not None:
            m_all = tuple(pair[0] for pair in draw)
            d = sample_counts["m"]
            d[m_all] = d.get(m_all, 0) + 1
            for e in net.edges:
                d = sample_counts["edge"][e.id]
                d[seqs[e.id]] = d.get(seqs[e.id], 0) + 1
            for alpha in net.wiretap_sets:
                obs = tuple(seqs[e] for e in alpha)
                for d, key in zip(sample_counts["alpha"][alpha],
                                  (obs, (m_all, obs))):
                    d[key] = d.get(key, 0) + 1

    errors = tuple(sorted((pair, Fraction(c, denom)) for pair, c in err_counts.items()))

    # exact quantities from joint types when available
    if sim.types is not None:
        type_total = sum(w for _, w in sim.types)

        def class_entropy(vals):
            buckets: dict = {}
            for counts, w in sim.types:
                tau = _push_type(counts, vals)
                buckets[tau] = buckets.get(tau, 0) + w
            return _entropy_of_classes(buckets, n_t, type_total)

        h_edge = {e.id: class_entropy(letter.edge_vals[e.id]) for e in net.edges}
        h_m_all = class_entropy(letter.m_proj)
        leak = []
        for alpha in net.wiretap_sets:
            vals_w = tuple(tuple(letter.edge_vals[e][ci] for e in alpha)
                           for ci in range(len(letter.cells)))
            vals_mw = tuple((letter.m_proj[ci], vals_w[ci])
                            for ci in range(len(letter.cells)))
            leak.append((alpha, h_m_all + class_entropy(vals_w) - class_entropy(vals_mw)))
    elif mode == "exhaustive":
        h_edge = {e: _entropy_of_counts(c, denom)
                  for e, c in sample_counts["edge"].items()}
        h_m_all = _entropy_of_counts(sample_counts["m"], denom)
        leak = []
        for alpha in net.wiretap_sets:
            obs_c, joint_c = sample_counts["alpha"][alpha]
            leak.append((alpha, h_m_all + _entropy_of_counts(obs_c, denom)
                         - _entropy_of_counts(joint_c, denom)))
        notes.append("joint types over cap; exact values from full enumeration")
    else:
        h_edge = {e: float(_entropy_of_counts(c, denom))
                  for e, c in sample_counts["edge"].items()}
        h_m_all = float(_entropy_of_counts(sample_counts["m"], denom))
        leak = []
        for alpha in net.wiretap_sets:
            obs_c, joint_c = sample_counts["alpha"][alpha]
            leak.append((alpha, h_m_all + float(_entropy_of_counts(obs_c, denom))
                         - float(_entropy_of_counts(joint_c, denom))))
        notes.append("plug-in entropy estimates from samples are biased low; "
                     "exact joint types were over cap")

    capacity = tuple(EdgeCapacityCheck(e.id, h_edge[e.id], n * e.cap,
                                       bool(h_edge[e.id] <= n * e.cap), "block-entropy")
                     for e in net.edges)

    if eps < 1:
        h_keys = sum(entropy_bits(letter.k_pmfs[s]) for s in letter.srcs)
        rhs = (len(letter.srcs) * _log2_any(Fraction(1) - eps) / n
               + 2 * eps * Fraction(n_t, n) * h_keys)
    else:
        rhs = None
        notes.append("analytic leakage bound undefined at eps >= 1")

    leakage = []
    for alpha, total_bits in leak:
        per = total_bits / n
        tol = 1e-12 if isinstance(per, float) or isinstance(rhs, float) else 0
        leakage.append(LeakageEntry(",".join(alpha), total_bits, per, rhs,
                                    None if rhs is None else bool(per <= rhs + tol)))

    if sim.atypical_estimated:
        notes.append("atypicality probabilities are Hoeffding-style estimates "
                     "(joint types over cap), flagged not exact")

    return ZeroErrorReport(
        mode=mode, trials=trials if mode == "montecarlo" else None,
        seed=seed if mode == "montecarlo" else None,
        n=n, delta=sim.delta,
        codebook_sizes=tuple((s, len(mb), len(kb)) for s, mb, kb in sim.books),
        p_atypical=sim.p_atypical,
        errors=errors, capacity=capacity, leakage=tuple(leakage),
        rates=_rate_entries(letter, sim.books, n_t, eps, n),
        notes=tuple(notes))


# ---------------------------------------------------------------------------
# fixed-length (asymptotic) simulator

SENTINEL = "sentinel"


@dataclass(frozen=True, eq=False)
class AsymptoticSim:
    rv: RvSystem
    n_t: int
    eps: Fraction
    eps_t: Fraction
    books: tuple
    n: int
    delta: Fraction
    edge_set_sizes: tuple[tuple[str, int], ...]
    types: "tuple | None"
    letter: _Letter


def build_asymptotic_sim(rv: RvSystem, n_t: int, eps, eps_t=None) -> AsymptoticSim:
    """Fixed-length construction: sentinel forwarding and joint-typicality
    decoding.  Requires eps < c_e on every edge, else the slack formula
    delta = 2 max (1+eps)(1+eps_k/c_e)/(1-eps/c_e) - 2 degenerates."""
    eps = Fraction(eps)
    eps_t = eps if eps_t is None else Fraction(eps_t)
    if n_t < 1 or eps <= 0 or eps_t <= 0:
        raise ValueError("need n_t >= 1, eps > 0 and eps_t > 0")
    letter = _single_letter(rv)
    books = _books(letter, n_t, eps)

    worst = Fraction(0)
    for e in rv.net.edges:
        if eps >= e.cap:
            raise ValueError(
                f"edge {e.id!r}: fixed-length slack needs eps < c_e "
                f"(eps={eps}, c_e={e.cap})")
        worst = max(worst, (1 + eps) * (1 + rv.eps_k / e.cap) / (1 - eps / e.cap))
    delta = 2 * worst - 2
    n = ceil_fraction(n_t * (1 + delta) / rv.a)

    sizes = tuple((e.id, typicality.typical_set_size(letter.edge_pmfs[e.id], n_t, eps))
                  for e in rv.net.edges)
    try:
        types = _joint_types(letter, n_t, eps)
    except SizeCapError:
        types = None
    return AsymptoticSim(rv, n_t, eps, eps_t, books, n, delta, sizes,
                         tuple(types) if types is not None else None, letter)


@dataclass(frozen=True)
class AsymptoticReport:
    mode: str
    trials: "int | None"
    seed: "int | None"
    n: int
    delta: Fraction
    eps_t: Fraction
    codebook_sizes: tuple[tuple[str, int, int], ...]
    alphabet_checks: tuple[EdgeCapacityCheck, ...]
    errors: tuple[tuple[tuple[str, str], "Fraction | float"], ...]
    sentinel_rate: tuple[tuple[str, "Fraction | float"], ...]
    leakage: tuple[LeakageEntry, ...]
    rates: tuple[RateEntry, ...]
    notes: tuple[str, ...]


def _pow2_at_least(size: int, bits: Fraction) -> bool:
    # size <= 2^bits, exactly
    if bits < 0:
        return size < 1
    p, q = bits.numerator, bits.denominator
    return size ** q <= 2 ** p


def _gated_sequences(sim: AsymptoticSim, draw):
    """Edge codewords with sentinel substitution per the typicality gates."""
    rv, letter, n_t, eps = sim.rv, sim.letter, sim.n_t, sim.eps
    net, code = rv.net, rv.code
    key = dict(code.key_sizes)
    alph, tabs = dict(code.edge_alphabets), dict(code.edge_tables)
    by_src = dict(zip(letter.srcs, draw))
    gate_src = {s: typicality.is_typical(tuple(zip(m, k)), letter.pair_pmfs[s], eps)
                for s, (m, k) in by_src.items()}
    out: dict[str, "tuple | None"] = {}
    gate_node: dict[str, "bool | None"] = {}
    for e in edge_processing_order(net):
        v = e.tail
        if v in net.sources:
            m_seq, k_seq = by_src[v]
            tab, ks = tabs[e.id], key[v]
            seq = tuple(tab[m * ks + k] for m, k in zip(m_seq, k_seq))
            out[e.id] = seq if gate_src[v] else None
            continue
        if v not in gate_node:
            ins = [x.id for x in domain_edges(net, e)]
            if any(out[x] is None for x in ins):
                gate_node[v] = None
            else:
                joint = tuple(tuple(out[x][i] for x in ins) for i in range(sim.n_t))
                pmf: dict = {}
                for ci, p in zip(range(len(letter.cells)), letter.cell_probs):
                    sym = tuple(letter.edge_vals[x][ci] for x in ins)
                    pmf[sym] = pmf.get(sym, Fraction(0)) + p
                gate_node[v] = typicality.is_typical(joint, pmf, eps)
        if gate_node[v] is None:
            out[e.id] = None
            continue
        ins = [x.id for x in domain_edges(net, e)]
        alphs = [alph[x] for x in ins]
        tab = tabs[e.id]
        vals = []
        for i in range(n_t):
            idx = 0
            for x, a in zip(ins, alphs):
                idx = idx * a + out[x][i]
            vals.append(tab[idx])
        out[e.id] = tuple(vals) if gate_node[v] else None
    return out


def _sink_decoder(sim: AsymptoticSim, t_node: str, s: str):
    """First-match joint-typicality decoder with memoization; sentinel or
    no match falls back to the lexicographically smallest codeword."""
    letter, n_t, eps_t = sim.letter, sim.n_t, sim.eps_t
    net = sim.rv.net
    ins = [e.id for e in sorted(net.in_edges(t_node), key=lambda e: e.id)]
    si = letter.srcs.index(s)
    pmf: dict = {}
    for ci, p in zip(range(len(letter.cells)), letter.cell_probs):
        sym = (letter.cells[ci][si][0],) + tuple(letter.edge_vals[x][ci] for x in ins)
        pmf[sym] = pmf.get(sym, Fraction(0)) + p
    support = frozenset(x for x, p in pmf.items() if p > 0)
    windows = {x: (n_t * p * (1 - eps_t), n_t * p * (1 + eps_t))
               for x, p in pmf.items() if p > 0}
    m_book = dict((s2, mb) for s2, mb, _ in sim.books)[s]
    fallback = m_book[0]
    memo: dict = {}

    def decode(received: tuple) -> tuple:
        if any(w is None for w in received):
            return fallback
        if received in memo:
            return memo[received]
        rec = tuple(tuple(seq[i] for seq in received) for i in range(n_t))
        result = fallback
        for cand in m_book:
            if any((cand[i],) + rec[i] not in support for i in range(n_t)):
                continue
            counts: dict = {}
            for i in range(n_t):
                sym = (cand[i],) + rec[i]
                counts[sym] = counts.get(sym, 0) + 1
            if all(lo <= counts.get(x, 0) <= hi for x, (lo, hi) in windows.items()):
                result = cand
                break
        memo[received] = result
        return result

    return decode, ins


def run_asymptotic_sim(sim: AsymptoticSim, mode: str = "exhaustive",
                       trials: "int | None" = None,
                       seed: "int | None" = None) -> AsymptoticReport:
    """Measured error and leakage for the fixed-length construction.

    Error analysis is empirical by design; the report carries the
    measured frequency, the per-edge sentinel rate, and exact leakage
    (with a sound bound: the ungated leakage plus one bit per wiretapped
    edge for its typicality indicator)."""
    rv, letter, n_t, n = sim.rv, sim.letter, sim.n_t, sim.n
    net = rv.net
    notes: list[str] = []
    if mode not in ("exhaustive", "montecarlo"):
        raise ValueError("mode must be exhaustive or montecarlo")
    if mode == "montecarlo":
        if not trials or trials < 1:
            raise ValueError("montecarlo mode needs trials >= 1")
        if seed is None:
            raise ValueError("montecarlo mode needs a seed for reproducibility")

    total = _draw_space(sim.books)
    if mode == "exhaustive":
        if total > DRAW_CAP:
            raise SizeCapError(
                f"exhaustive run would enumerate {total} draws (cap {DRAW_CAP}); "
                "use montecarlo mode")
        draws = _iter_draws(sim.books)
        denom = total
    else:
        draws = _sample_draws(sim.books, trials, seed)
        denom = trials

    decoders = {}
    for t in net.sinks:
        for s in t.beta:
            decoders[(t.node, s)] = _sink_decoder(sim, t.node, s)

    err_counts = {pair: 0 for pair in decoders}
    sent_counts = {e.id: 0 for e in net.edges}
    obs_counts = {alpha: ({}, {}) for alpha in net.wiretap_sets}
    m_counts: dict = {}
    by_src_order = letter.srcs

    for draw in draws:
        seqs = _gated_sequences(sim, draw)
        for e in net.edges:
            if seqs[e.id] is None:
                sent_counts[e.id] += 1
        for (t_node, s), (decode, ins) in decoders.items():
            received = tuple(seqs[e] for e in ins)
            if decode(received) != draw[by_src_order.index(s)][0]:
                err_counts[(t_node, s)] += 1
        m_all = tuple(pair[0] for pair in draw)
        m_counts[m_all] = m_counts.get(m_all, 0) + 1
        for alpha in net.wiretap_sets:
            obs = tuple(seqs[e] if seqs[e] is not None else SENTINEL for e in alpha)
            obs_c, joint_c = obs_counts[alpha]
            obs_c[obs] = obs_c.get(obs, 0) + 1
            joint_c[(m_all, obs)] = joint_c.get((m_all, obs), 0) + 1

    errors = tuple(sorted((pair, Fraction(c, denom)) for pair, c in err_counts.items()))
    sentinel_rate = tuple((e.id, Fraction(sent_counts[e.id], denom)) for e in net.edges)

    # ungated leakage (exact over types) feeds the indicator-overhead bound
    ungated: "dict | None" = None
    if sim.types is not None:
        type_total = sum(w for _, w in sim.types)

        def class_entropy(vals):
            buckets: dict = {}
            for counts, w in sim.types:
                tau = _push_type(counts, vals)
                buckets[tau] = buckets.get(tau, 0) + w
            return _entropy_of_classes(buckets, n_t, type_total)

        h_m_all = class_entropy(letter.m_proj)
        ungated = {}
        for alpha in net.wiretap_sets:
            vals_w = tuple(tuple(letter.edge_vals[e][ci] for e in alpha)
                           for ci in range(len(letter.cells)))
            vals_mw = tuple((letter.m_proj[ci], vals_w[ci])
                            for ci in range(len(letter.cells)))
            ungated[alpha] = (h_m_all + class_entropy(vals_w)
                              - class_entropy(vals_mw))
    else:
        notes.append("joint types over cap; leakage bound omitted")

    leakage = []
    measured_exact = mode == "exhaustive"
    if not measured_exact:
        notes.append("plug-in entropy estimates from samples are biased low")
    h_m = _entropy_of_counts(m_counts, denom)
    for alpha in net.wiretap_sets:
        obs_c, joint_c = obs_counts[alpha]
        total_bits = (h_m + _entropy_of_counts(obs_c, denom)
                      - _entropy_of_counts(joint_c, denom))
        if not measured_exact:
            total_bits = float(total_bits)
        per = total_bits / n
        if ungated is not None:
            bound = (ungated[alpha] + len(alpha)) / n
            tol = 1e-12 if isinstance(per, float) or isinstance(bound, float) else 0
            within = bool(per <= bound + tol)
        else:
            bound, within = None, None
        leakage.append(LeakageEntry(",".join(alpha), total_bits, per, bound, within))

    checks = []
    for e in net.edges:
        size = dict(sim.edge_set_sizes)[e.id] + 1  # sentinel enlarges the alphabet
        budget = n * e.cap
        checks.append(EdgeCapacityCheck(e.id, math.log2(size), budget,
                                        _pow2_at_least(size, budget), "alphabet"))

    return AsymptoticReport(
        mode=mode, trials=trials if mode == "montecarlo" else None,
        seed=seed if mode == "montecarlo" else None,
        n=n, delta=sim.delta, eps_t=sim.eps_t,
        codebook_sizes=tuple((s, len(mb), len(kb)) for s, mb, kb in sim.books),
        alphabet_checks=tuple(checks),
        errors=errors, sentinel_rate=sentinel_rate, leakage=tuple(leakage),
        rates=_rate_entries(letter, sim.books, n_t, sim.eps, n),
        notes=tuple(notes))
