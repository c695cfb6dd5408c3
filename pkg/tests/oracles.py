"""Independent brute-force oracles the test suite checks the package against.

Everything here is deliberately written from scratch with the dumbest
correct algorithm available (augmenting paths, vertex enumeration,
Gaussian elimination over Fractions) so that agreement with the package
is evidence, not circularity.
"""

from __future__ import annotations

import itertools
from collections import deque
from fractions import Fraction


def max_flow(net, source: str, sink: str) -> Fraction:
    """Ford-Fulkerson with BFS augmenting paths, exact capacities."""
    residual: dict[str, dict[str, Fraction]] = {}

    def add(u, v, cap):
        residual.setdefault(u, {})
        residual.setdefault(v, {})
        residual[u][v] = residual[u].get(v, Fraction(0)) + cap
        residual[v].setdefault(u, Fraction(0))

    for e in net.edges:
        add(e.tail, e.head, Fraction(e.cap))

    total = Fraction(0)
    while True:
        parent = {source: None}
        queue = deque([source])
        while queue and sink not in parent:
            u = queue.popleft()
            for v, cap in residual.get(u, {}).items():
                if cap > 0 and v not in parent:
                    parent[v] = u
                    queue.append(v)
        if sink not in parent:
            return total
        # trace the path and push its bottleneck
        path = []
        v = sink
        while parent[v] is not None:
            path.append((parent[v], v))
            v = parent[v]
        push = min(residual[u][v] for u, v in path)
        for u, v in path:
            residual[u][v] -= push
            residual[v][u] += push
        total += push


def _solve_square(rows: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    """Gaussian elimination; None when the system is singular."""
    k = len(rows)
    m = [row[:] + [b] for row, b in zip(rows, rhs)]
    for col in range(k):
        pivot = next((r for r in range(col, k) if m[r][col] != 0), None)
        if pivot is None:
            return None
        m[col], m[pivot] = m[pivot], m[col]
        inv = 1 / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for r in range(k):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return [m[r][k] for r in range(k)]


def vertex_optimum(
    rows: list[list[Fraction]],
    rels: list[str],
    rhs: list[Fraction],
    objective: list[Fraction],
) -> tuple[str, Fraction | None]:
    """Max of objective over {x >= 0, rows x rel rhs} by vertex enumeration.

    Returns ("infeasible", None) when no vertex is feasible.  Sound for
    bounded problems; the caller handles the unbounded case separately
    (the region x >= 0 is pointed, so a feasible bounded LP attains its
    optimum at an enumerated vertex).
    """
    k = len(objective)
    pool = [(row, rel, b) for row, rel, b in zip(rows, rels, rhs)]
    for i in range(k):
        unit = [Fraction(0)] * k
        unit[i] = Fraction(1)
        pool.append((unit, ">=", Fraction(0)))

    best: Fraction | None = None
    seen_feasible = False
    for combo in itertools.combinations(range(len(pool)), k):
        a = [pool[i][0] for i in combo]
        b = [pool[i][2] for i in combo]
        x = _solve_square(a, b)
        if x is None:
            continue
        if any(v < 0 for v in x):
            continue
        ok = True
        for row, rel, bb in pool:
            lhs = sum(c * v for c, v in zip(row, x))
            if rel == "<=" and lhs > bb:
                ok = False
            elif rel == ">=" and lhs < bb:
                ok = False
            elif rel == "=" and lhs != bb:
                ok = False
            if not ok:
                break
        if not ok:
            continue
        seen_feasible = True
        val = sum(c * v for c, v in zip(objective, x))
        if best is None or val > best:
            best = val
    if not seen_feasible:
        return "infeasible", None
    return "optimal", best


def verify_optimal_dual(
    rows: list[list[Fraction]],
    rels: list[str],
    rhs: list[Fraction],
    objective: list[Fraction],
    dual: tuple[Fraction, ...],
    value: Fraction,
) -> None:
    """Independent dual check for a nonneg-variable maximization.

    Signs: y >= 0 on <= rows, y <= 0 on >= rows, free on = rows; reduced
    costs sum(y_i a_ij) >= c_j for every j; and y.b equals the value.
    """
    assert len(dual) == len(rows)
    for y, rel in zip(dual, rels):
        if rel == "<=":
            assert y >= 0, "dual sign on <= row"
        elif rel == ">=":
            assert y <= 0, "dual sign on >= row"
    for j in range(len(objective)):
        reduced = sum(y * row[j] for y, row in zip(dual, rows))
        assert reduced >= objective[j], "dual infeasible"
    assert sum(y * b for y, b in zip(dual, rhs)) == value, "duality gap"


def verify_ray(
    rows: list[list[Fraction]],
    rels: list[str],
    objective: list[Fraction],
    ray: dict[int, Fraction],
    var_masks: list[int],
) -> None:
    """A certified unbounded direction: feasible recession ray with gain."""
    r = [ray.get(m, Fraction(0)) for m in var_masks]
    assert all(v >= 0 for v in r), "ray leaves the nonneg orthant"
    for row, rel in zip(rows, rels):
        drift = sum(c * v for c, v in zip(row, r))
        if rel == "<=":
            assert drift <= 0
        elif rel == ">=":
            assert drift >= 0
        else:
            assert drift == 0
    assert sum(c * v for c, v in zip(objective, r)) > 0, "ray does not improve"
