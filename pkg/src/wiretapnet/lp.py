"""Exact rational linear programming over subset-indexed coordinates.

Two-phase primal simplex on a dense tableau of exact rationals (gmpy2
mpq when available, Fraction otherwise).  No floating point anywhere in
the pivot path.  Pivoting is deterministic: the most-improving column
normally, with a lexicographic ratio test so cycling is impossible.
Every terminal status carries an exactly verified
certificate: optimal results a matching dual vector, infeasible results
a Farkas vector, unbounded results a feasible point plus an improving
recession ray.

For systems too large to tableau whole (the elemental cone grows as
n * 2^n), ``solve_cutting`` activates rows lazily: solve a relaxation,
test the candidate against every dormant row in exact arithmetic,
activate violated rows, repeat.  Inactive coordinates are pinned to
zero, which cannot cut the optimum because a coordinate outside every
active row and the objective has no effect on the relaxation's value.
The returned witness and dual are verified against the full system, so
the shortcut is invisible in the result contract.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .entropy import ConstraintSystem, LinearConstraint

try:
    from gmpy2 import mpq as _Q
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    _Q = Fraction

_ZERO = _Q(0)
_ONE = _Q(1)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT = "limit_exceeded"

class PivotLimitError(RuntimeError):
    pass


class CertificateError(RuntimeError):
    """An internally produced certificate failed its exact re-check."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise CertificateError(msg)


@dataclass(frozen=True)
class LpProblem:
    """Maximize sum(objective[mask] * h[mask]) subject to a ConstraintSystem.

    ``nonneg`` declares every coordinate >= 0.  For entropy problems this
    is sound (nonnegativity of each joint entropy is implied by the
    elemental rows) and roughly halves the tableau; general problems
    leave it False and coordinates are free.
    """

    system: ConstraintSystem
    objective: tuple[tuple[int, Fraction], ...]
    nonneg: bool = False

    @classmethod
    def make(cls, system: ConstraintSystem, objective: Mapping[int, Fraction], nonneg: bool = False):
        obj = tuple(sorted((m, Fraction(c)) for m, c in objective.items() if c != 0))
        for mask, _ in obj:
            if not 0 < mask < (1 << system.n):
                raise ValueError(f"objective mask {mask} outside coordinate space")
        return cls(system, obj, nonneg)


@dataclass(frozen=True)
class LpResult:
    status: str
    value: Fraction | None
    witness: dict[int, Fraction] | None  # mask -> value; masks absent are zero
    dual: tuple[Fraction, ...] | None    # one multiplier per constraint row
    ray: dict[int, Fraction] | None
    pivots: int


def _to_q(fr) -> "_Q":
    return _Q(fr.numerator, fr.denominator) if isinstance(fr, Fraction) else _Q(fr)


def _to_fraction(q) -> Fraction:
    f = Fraction(q.numerator, q.denominator) if not isinstance(q, Fraction) else q
    return f


class _Tableau:
    """Standard-form equality tableau with explicit cost rows."""

    def __init__(self, problem: LpProblem, trace=None):
        self.trace = trace
        system = problem.system
        masks = sorted({m for con in system.constraints for m, _ in con.coeffs}
                       | {m for m, _ in problem.objective})
        self.masks = masks
        self.col_of_mask = {m: j for j, m in enumerate(masks)}
        self.split = not problem.nonneg
        nm = len(masks)
        self.n_struct = nm * 2 if self.split else nm

        rows = []       # constraint coefficient rows over structural columns
        rels = []
        rhs = []
        for con in system.constraints:
            row = [_ZERO] * self.n_struct
            for m, c in con.coeffs:
                j = self.col_of_mask[m]
                q = _to_q(c)
                row[j] += q
                if self.split:
                    row[nm + j] -= q
            rows.append(row)
            rels.append(con.rel)
            rhs.append(_to_q(con.rhs))

        # normalize to nonnegative right-hand sides; homogeneous ">=" rows
        # are negated into "<=" form so their slack can start basic and no
        # artificial variable is spent on them
        self.flipped = [False] * len(rows)
        for i in range(len(rows)):
            if rhs[i] < 0 or (rels[i] == ">=" and rhs[i] == 0):
                rows[i] = [-v for v in rows[i]]
                rhs[i] = -rhs[i]
                rels[i] = {"<=": ">=", ">=": "<=", "=": "="}[rels[i]]
                self.flipped[i] = True

        m = len(rows)
        self.n_rows = m
        self.slack_col = [-1] * m
        self.art_col = [-1] * m
        ncols = self.n_struct
        for i, rel in enumerate(rels):
            if rel in ("<=", ">="):
                self.slack_col[i] = ncols
                ncols += 1
        for i, rel in enumerate(rels):
            if rel in ("=", ">="):
                self.art_col[i] = ncols
                ncols += 1
        self.n_cols = ncols
        self.first_art = min([c for c in self.art_col if c >= 0], default=ncols)

        self.rows = []
        self.basis = []
        for i in range(m):
            row = rows[i] + [_ZERO] * (ncols - self.n_struct)
            if self.slack_col[i] >= 0:
                row[self.slack_col[i]] = _ONE if rels[i] == "<=" else -_ONE
            if self.art_col[i] >= 0:
                row[self.art_col[i]] = _ONE
                self.basis.append(self.art_col[i])
            else:
                self.basis.append(self.slack_col[i])
            row.append(rhs[i])
            self.rows.append(row)
        self.rels = rels

        # phase-2 cost row: reduced costs c_j - z_j, value in last slot (negated objective value)
        cost2 = [_ZERO] * (ncols + 1)
        for m_, c in problem.objective:
            j = self.col_of_mask[m_]
            q = _to_q(c)
            cost2[j] += q
            if self.split:
                cost2[nm + j] -= q
        self.cost2 = cost2
        # phase-1 cost row: maximize -(sum of artificials)
        cost1 = [_ZERO] * (ncols + 1)
        for i in range(m):
            if self.art_col[i] >= 0:
                cost1[self.art_col[i]] = -_ONE
        # price out the initial basis (artificials are basic with coeff -1)
        for i in range(m):
            if self.art_col[i] >= 0:
                row = self.rows[i]
                for j in range(ncols + 1):
                    if row[j]:
                        cost1[j] += row[j]
        for i in range(m):
            if self.art_col[i] >= 0:
                cost1[self.art_col[i]] = _ZERO
        self.cost1 = cost1
        self.row_index = list(range(m))  # original row id per live tableau row
        self.lex_order = list(self.basis)  # initial identity columns, fixed
        self.pivots = 0

    # -- pivoting ---------------------------------------------------------

    def _pivot(self, r: int, c: int, costs: list) -> None:
        prow = self.rows[r]
        piv = prow[c]
        if piv != 1:
            inv = _ONE / piv
            self.rows[r] = prow = [v * inv for v in prow]
        for i, row in enumerate(self.rows):
            if i != r:
                f = row[c]
                if f:
                    self.rows[i] = [a - f * b for a, b in zip(row, prow)]
        for cost in costs:
            f = cost[c]
            if f:
                cost[:] = [a - f * b for a, b in zip(cost, prow)]
        self.basis[r] = c
        self.pivots += 1
        if self.trace is not None:
            self.trace.write(f"pivot {self.pivots}: col {c} enters, row {r} leaves\n")

    def _ratio_leave(self, c: int) -> int | None:
        """Minimum-ratio row, lexicographic tie-break (cycling-proof).

        Ties are resolved by comparing rows scaled by the pivot entry
        along the fixed initial-identity column order, which keeps every
        row lex-positive and makes the objective row strictly lex-decrease
        each pivot, so no basis can repeat.
        """
        ties: list[int] = []
        best_ratio = None
        for i, row in enumerate(self.rows):
            a = row[c]
            if a > 0:
                ratio = row[-1] / a
                if best_ratio is None or ratio < best_ratio:
                    ties = [i]
                    best_ratio = ratio
                elif ratio == best_ratio:
                    ties.append(i)
        if not ties:
            return None
        if len(ties) > 1:
            for col in self.lex_order:
                vals = [self.rows[i][col] / self.rows[i][c] for i in ties]
                lo = min(vals)
                ties = [i for i, v in zip(ties, vals) if v == lo]
                if len(ties) == 1:
                    break
        return ties[0]

    def _run(self, cost, other_costs, allow, max_pivots) -> str:
        """Simplex loop on one cost row; returns 'optimal' or 'unbounded'."""
        while True:
            enter = None
            best = _ZERO
            for j in range(self.n_cols):
                if allow[j] and cost[j] > best:
                    best = cost[j]
                    enter = j
            if enter is None:
                return OPTIMAL
            leave = self._ratio_leave(enter)
            if leave is None:
                self.unbounded_col = enter
                return UNBOUNDED
            if self.pivots >= max_pivots:
                raise PivotLimitError()
            self._pivot(leave, enter, [cost] + other_costs)

    # -- solution extraction ----------------------------------------------

    def _structural_values(self) -> list:
        vals = [_ZERO] * self.n_struct
        for i, b in enumerate(self.basis):
            if b < self.n_struct:
                vals[b] = self.rows[i][-1]
        return vals

    def mask_values(self) -> dict[int, Fraction]:
        vals = self._structural_values()
        nm = len(self.masks)
        out = {}
        for j, mask in enumerate(self.masks):
            v = vals[j] - vals[nm + j] if self.split else vals[j]
            if v != 0:
                out[mask] = _to_fraction(v)
        return out

    def ray_values(self) -> dict[int, Fraction]:
        c = self.unbounded_col
        direction = [_ZERO] * self.n_struct
        if c < self.n_struct:
            direction[c] = _ONE
        for i, b in enumerate(self.basis):
            if b < self.n_struct:
                direction[b] = -self.rows[i][c]
        nm = len(self.masks)
        out = {}
        for j, mask in enumerate(self.masks):
            v = direction[j] - direction[nm + j] if self.split else direction[j]
            if v != 0:
                out[mask] = _to_fraction(v)
        return out

    def _purge_artificials(self, allow: list) -> None:
        """Drive basic artificials out of the basis once phase 1 ends at zero.

        Each one sits at value zero, so pivoting it onto any allowed column
        with a nonzero entry in its row is degenerate and keeps feasibility.
        When the whole row is zero on allowed columns the original row is a
        consequence of the others (its rhs is zero too) and is dropped;
        dropped rows later get dual multiplier zero.
        """
        r = 0
        while r < len(self.rows):
            if self.basis[r] >= self.first_art:
                row = self.rows[r]
                enter = next((j for j in range(self.n_cols) if allow[j] and row[j] != 0), None)
                if enter is None:
                    del self.rows[r]
                    del self.basis[r]
                    del self.row_index[r]
                    continue
                self._pivot(r, enter, [self.cost1, self.cost2])
            r += 1

    def duals_from(self, cost: list, art_cost=_ZERO) -> list[Fraction]:
        """Row multipliers implied by a priced-out cost row.

        y_i = c(logical column of row i) - rc(that column).  Slacks cost
        zero in both phases; artificials cost ``art_cost`` (-1 while the
        phase-1 row is the one being read).  The sign flips back for rows
        negated during rhs normalization, and rows dropped as redundant
        keep multiplier zero.
        """
        ys = [Fraction(0)] * self.n_rows
        for orig in self.row_index:
            if self.art_col[orig] >= 0:
                y = art_cost - cost[self.art_col[orig]]
            else:
                y = -cost[self.slack_col[orig]]
            if self.flipped[orig]:
                y = -y
            ys[orig] = _to_fraction(y)
        return ys


def _eval_row(con: LinearConstraint, x: Mapping[int, Fraction]) -> Fraction:
    return sum((c * x.get(m, Fraction(0)) for m, c in con.coeffs), Fraction(0))


def _check_feasible(system: ConstraintSystem, x: Mapping[int, Fraction], nonneg: bool) -> bool:
    if nonneg and any(v < 0 for v in x.values()):
        return False
    for con in system.constraints:
        lhs = _eval_row(con, x)
        if con.rel == "=" and lhs != con.rhs:
            return False
        if con.rel == "<=" and lhs > con.rhs:
            return False
        if con.rel == ">=" and lhs < con.rhs:
            return False
    return True


def _objective_value(problem: LpProblem, x: Mapping[int, Fraction]) -> Fraction:
    return sum((c * x.get(m, Fraction(0)) for m, c in problem.objective), Fraction(0))


def _verify_optimal(problem: LpProblem, x, y, value) -> None:
    system = problem.system
    _require(_check_feasible(system, x, problem.nonneg), "witness infeasible")
    _require(_objective_value(problem, x) == value, "witness value mismatch")
    obj = dict(problem.objective)
    col_sum: dict[int, Fraction] = {}
    ybtotal = Fraction(0)
    for yi, con in zip(y, system.constraints):
        if con.rel == "<=":
            _require(yi >= 0, "dual sign")
        elif con.rel == ">=":
            _require(yi <= 0, "dual sign")
        if yi != 0:
            for m, c in con.coeffs:
                col_sum[m] = col_sum.get(m, Fraction(0)) + yi * c
            ybtotal += yi * con.rhs
    for m in set(col_sum) | set(obj):
        lhs = col_sum.get(m, Fraction(0))
        cj = obj.get(m, Fraction(0))
        if problem.nonneg:
            _require(lhs >= cj, "dual infeasible")
        else:
            _require(lhs == cj, "dual infeasible (free variable)")
    _require(ybtotal == value, "strong duality gap")


def _verify_infeasible(problem: LpProblem, y) -> None:
    system = problem.system
    col_sum: dict[int, Fraction] = {}
    yb = Fraction(0)
    for yi, con in zip(y, system.constraints):
        if con.rel == "<=":
            _require(yi >= 0, "farkas sign")
        elif con.rel == ">=":
            _require(yi <= 0, "farkas sign")
        if yi != 0:
            for m, c in con.coeffs:
                col_sum[m] = col_sum.get(m, Fraction(0)) + yi * c
            yb += yi * con.rhs
    if problem.nonneg:
        _require(all(v >= 0 for v in col_sum.values()), "farkas column condition")
    else:
        _require(all(v == 0 for v in col_sum.values()), "farkas column condition")
    _require(yb < 0, "farkas value condition")


def _verify_unbounded(problem: LpProblem, x, d) -> None:
    system = problem.system
    _require(_check_feasible(system, x, problem.nonneg), "base point infeasible")
    if problem.nonneg:
        _require(all(v >= 0 for v in d.values()), "ray sign")
    for con in system.constraints:
        move = _eval_row(con, d)
        if con.rel == "=":
            _require(move == 0, "ray leaves equality")
        elif con.rel == "<=":
            _require(move <= 0, "ray violates <= row")
        else:
            _require(move >= 0, "ray violates >= row")
    gain = sum((c * d.get(m, Fraction(0)) for m, c in problem.objective), Fraction(0))
    _require(gain > 0, "ray does not improve objective")


def solve(problem: LpProblem, max_pivots: int = 200_000, trace_path: str | None = None) -> LpResult:
    """Exact two-phase simplex; certificates are verified before returning."""
    trace = open(trace_path, "w") if trace_path else None
    try:
        t = _Tableau(problem, trace=trace)
        if trace:
            trace.write(f"tableau {t.n_rows} rows x {t.n_cols} cols, "
                        f"{len(t.masks)} coordinates, split={t.split}\n")
        allow1 = [j < t.first_art for j in range(t.n_cols)]
        try:
            status = t._run(t.cost1, [t.cost2], allow1, max_pivots)
        except PivotLimitError:
            return LpResult(LIMIT, None, None, None, None, t.pivots)
        _require(status == OPTIMAL, "phase 1 cannot be unbounded")
        if t.cost1[-1] != 0:
            # maximum of -(sum artificials) is negative: infeasible
            y = t.duals_from(t.cost1, art_cost=-_ONE)
            _verify_infeasible(problem, y)
            return LpResult(INFEASIBLE, None, None, tuple(y), None, t.pivots)
        t._purge_artificials(allow1)

        try:
            status = t._run(t.cost2, [t.cost1], allow1, max_pivots)
        except PivotLimitError:
            return LpResult(LIMIT, None, None, None, None, t.pivots)
        if status == UNBOUNDED:
            x = t.mask_values()
            d = t.ray_values()
            _verify_unbounded(problem, x, d)
            return LpResult(UNBOUNDED, None, x, None, d, t.pivots)
        x = t.mask_values()
        value = _objective_value(problem, x)
        y = t.duals_from(t.cost2)
        _verify_optimal(problem, x, y, value)
        return LpResult(OPTIMAL, value, x, tuple(y), None, t.pivots)
    finally:
        if trace:
            trace.close()


def feasible(system: ConstraintSystem, nonneg: bool = False, max_pivots: int = 200_000):
    """Phase-1 feasibility: (True, witness) or (False, farkas multipliers)."""
    res = solve(LpProblem.make(system, {}, nonneg=nonneg), max_pivots=max_pivots)
    if res.status == OPTIMAL:
        return True, res.witness
    if res.status == INFEASIBLE:
        return False, res.dual
    raise RuntimeError(f"feasibility probe ended with status {res.status}")


def _row_violated(con: LinearConstraint, x: Mapping[int, Fraction]) -> Fraction:
    """Positive violation magnitude, or 0 when satisfied."""
    lhs = _eval_row(con, x)
    if con.rel == "=":
        return abs(lhs - con.rhs)
    if con.rel == "<=":
        return max(Fraction(0), lhs - con.rhs)
    return max(Fraction(0), con.rhs - lhs)


def _row_cuts_ray(con: LinearConstraint, d: Mapping[int, Fraction]) -> bool:
    move = _eval_row(con, d)
    if con.rel == "=":
        return move != 0
    if con.rel == "<=":
        return move > 0
    return move < 0


def _float_solution(problem: LpProblem):
    """Float primal/dual pair from a fast LP run, or None.

    Purely advisory for :func:`solve_cutting`: the caller re-derives
    everything in exact arithmetic, so a wrong answer here can slow the
    exact path down but never corrupt it.  Returns ``(x, y)`` with ``x``
    a mask->float dict and ``y`` one float per row, in the max-objective
    sign convention (y >= 0 on <= rows, y <= 0 on >= rows).
    """
    try:
        import numpy as np
        from scipy.optimize import linprog
        from scipy.sparse import csr_matrix
    except ImportError:  # pragma: no cover - scipy is a declared dependency
        return None
    cons = problem.system.constraints
    masks = sorted({m for con in cons for m, _ in con.coeffs} | {m for m, _ in problem.objective})
    col = {m: j for j, m in enumerate(masks)}
    c = np.zeros(len(masks))
    for m, q in problem.objective:
        c[col[m]] = -float(q)  # linprog minimizes

    ub_data, ub_ri, ub_ci, ub_b, ub_idx = [], [], [], [], []
    eq_data, eq_ri, eq_ci, eq_b, eq_idx = [], [], [], [], []
    for i, con in enumerate(cons):
        sign = -1.0 if con.rel == ">=" else 1.0
        if con.rel == "=":
            r = len(eq_b)
            for m, q in con.coeffs:
                eq_data.append(float(q))
                eq_ri.append(r)
                eq_ci.append(col[m])
            eq_b.append(float(con.rhs))
            eq_idx.append(i)
        else:
            r = len(ub_b)
            for m, q in con.coeffs:
                ub_data.append(sign * float(q))
                ub_ri.append(r)
                ub_ci.append(col[m])
            ub_b.append(sign * float(con.rhs))
            ub_idx.append(i)
    kw = {}
    if ub_b:
        kw["A_ub"] = csr_matrix((ub_data, (ub_ri, ub_ci)), shape=(len(ub_b), len(masks)))
        kw["b_ub"] = np.array(ub_b)
    if eq_b:
        kw["A_eq"] = csr_matrix((eq_data, (eq_ri, eq_ci)), shape=(len(eq_b), len(masks)))
        kw["b_eq"] = np.array(eq_b)
    lo = 0.0 if problem.nonneg else None
    res = linprog(c, bounds=(lo, None), method="highs", **kw)
    if not res.success:
        return None
    x = {m: float(res.x[j]) for m, j in col.items()}
    y = [0.0] * len(cons)
    for r, i in enumerate(ub_idx):
        # linprog marginals are d(min)/d(b); our max-form dual negates them,
        # and rows fed in negated (">=") flip once more
        lam = -float(res.ineqlin.marginals[r])
        y[i] = -lam if cons[i].rel == ">=" else lam
    for r, i in enumerate(eq_idx):
        y[i] = -float(res.eqlin.marginals[r])
    return x, y


_SNAP_DENOMINATOR = 1 << 20


def _snap_solution(problem: LpProblem, xf, yf) -> LpResult | None:
    """Round a float primal/dual pair to rationals and verify exactly.

    Vertices of these subset-entropy LPs have small rational coordinates,
    so a nearby float vertex usually snaps to the true one.  Returns a
    fully verified optimal result, or None when the snapped pair fails
    any exact check (the caller then falls back to the exact simplex).
    """
    x = {}
    for m, v in xf.items():
        fv = Fraction(v).limit_denominator(_SNAP_DENOMINATOR)
        if fv != 0:
            x[m] = fv
    y = tuple(Fraction(v).limit_denominator(_SNAP_DENOMINATOR) for v in yf)
    value = _objective_value(problem, x)
    try:
        _verify_optimal(problem, x, y, value)
    except CertificateError:
        return None
    return LpResult(OPTIMAL, value, x, y, None, 0)


def solve_cutting(
    problem: LpProblem,
    initial_rows: Sequence[int] | None = None,
    max_pivots: int = 2_000_000,
    grow_limit: int = 256,
) -> LpResult:
    """Large-system exact solve; result contract identical to :func:`solve`.

    A float run over the full system proposes an optimal vertex; if that
    vertex snaps to exact rationals and passes every exact feasibility,
    duality and complementarity check, it is returned directly.  When
    snapping fails the exact simplex takes over on the active subset
    seeded with the float dual's support, growing it lazily: each round
    solves the relaxation exactly and activates dormant rows the
    candidate point (or improving ray) violates, at most ``grow_limit``
    per round, most-violated first, until none remain.  Either way every
    certificate returned has been verified against the full system in
    exact arithmetic.  ``initial_rows`` adds rows to the initial active
    set (defaults to rows with at most two terms).
    """
    cons = problem.system.constraints
    if initial_rows is None:
        active = {i for i, c in enumerate(cons) if len(c.coeffs) <= 2}
    else:
        active = set(initial_rows)
    hint = _float_solution(problem)
    if hint is not None:
        snapped = _snap_solution(problem, *hint)
        if snapped is not None:
            return snapped
        active |= {i for i, v in enumerate(hint[1]) if abs(v) > 1e-9}
    total_pivots = 0
    while True:
        idx = sorted(active)
        sub = ConstraintSystem(problem.system.n, tuple(cons[i] for i in idx))
        res = solve(LpProblem(sub, problem.objective, problem.nonneg), max_pivots=max_pivots - total_pivots)
        total_pivots += res.pivots
        if res.status == LIMIT:
            return LpResult(LIMIT, None, None, None, None, total_pivots)
        if res.status == INFEASIBLE:
            dual = [Fraction(0)] * len(cons)
            for j, i in enumerate(idx):
                dual[i] = res.dual[j]
            _verify_infeasible(problem, dual)
            return LpResult(INFEASIBLE, None, None, tuple(dual), None, total_pivots)

        x = res.witness
        fresh: list[tuple[Fraction, int]] = []
        if res.status == UNBOUNDED:
            d = res.ray
            for i, con in enumerate(cons):
                if i in active:
                    continue
                if _row_cuts_ray(con, d):
                    fresh.append((Fraction(1), i))
                else:
                    v = _row_violated(con, x)
                    if v > 0:
                        fresh.append((v, i))
            if not fresh:
                _verify_unbounded(problem, x, d)
                return LpResult(UNBOUNDED, None, x, None, d, total_pivots)
        else:
            for i, con in enumerate(cons):
                if i in active:
                    continue
                v = _row_violated(con, x)
                if v > 0:
                    fresh.append((v, i))
            if not fresh:
                dual = [Fraction(0)] * len(cons)
                for j, i in enumerate(idx):
                    dual[i] = res.dual[j]
                _verify_optimal(problem, x, dual, res.value)
                return LpResult(OPTIMAL, res.value, x, tuple(dual), None, total_pivots)
        fresh.sort(key=lambda t: (-t[0], t[1]))
        for _, i in fresh[:grow_limit]:
            active.add(i)
