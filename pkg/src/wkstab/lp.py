"""Exact rational linear programming (two-phase simplex, Bland's rule).

Problems here are tiny (a handful of variables, tens of constraints) but the
answers gate combinatorial predicates: facet irredundancy, strict interior
witnesses, D-admissibility, suprema of linear pieces.  Floating-point LP would
turn those predicates into epsilon guesses, so everything runs on Fractions.
"""

from __future__ import annotations

from fractions import Fraction

from .rational import fr

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"


def _simplex(tableau, basis, obj):
    """Maximize obj over the current feasible dictionary.  Bland's rule."""
    m = len(tableau)
    ncols = len(tableau[0]) - 1
    while True:
        reduced = list(obj) + [Fraction(0)]
        for i in range(m):
            cb = obj[basis[i]]
            if cb != 0:
                row = tableau[i]
                for j in range(ncols + 1):
                    if row[j] != 0:
                        reduced[j] -= cb * row[j]
        enter = next((j for j in range(ncols) if reduced[j] > 0), None)
        if enter is None:
            return OPTIMAL
        best = None
        for i in range(m):
            coef = tableau[i][enter]
            if coef > 0:
                ratio = tableau[i][ncols] / coef
                if best is None or ratio < best[0] or (
                    ratio == best[0] and basis[i] < basis[best[1]]
                ):
                    best = (ratio, i)
        if best is None:
            return UNBOUNDED
        _, leave = best
        pivot_row = tableau[leave]
        piv = pivot_row[enter]
        tableau[leave] = [x / piv for x in pivot_row]
        for i in range(m):
            if i != leave and tableau[i][enter] != 0:
                f = tableau[i][enter]
                row = tableau[i]
                prow = tableau[leave]
                tableau[i] = [x - f * y for x, y in zip(row, prow)]
        basis[leave] = enter


def lp_max(c, a_ub, b_ub):
    """Maximize c.x subject to a_ub @ x <= b_ub with x free.

    Returns (status, x, value); x and value are None unless status=optimal.
    """
    c = [fr(x) for x in c]
    a_ub = [[fr(x) for x in row] for row in a_ub]
    b_ub = [fr(x) for x in b_ub]
    n = len(c)
    m = len(a_ub)
    if m == 0:
        if all(x == 0 for x in c):
            return OPTIMAL, tuple(Fraction(0) for _ in range(n)), Fraction(0)
        return UNBOUNDED, None, None
    nslack = m
    nart = sum(1 for b in b_ub if b < 0)
    ncols = 2 * n + nslack + nart
    tableau = []
    basis = []
    art_index = 2 * n + nslack
    for i in range(m):
        row = [Fraction(0)] * (ncols + 1)
        sign = 1 if b_ub[i] >= 0 else -1
        for j in range(n):
            row[j] = sign * a_ub[i][j]
            row[n + j] = -sign * a_ub[i][j]
        row[2 * n + i] = Fraction(sign)
        row[ncols] = sign * b_ub[i]
        if sign < 0:
            row[art_index] = Fraction(1)
            basis.append(art_index)
            art_index += 1
        else:
            basis.append(2 * n + i)
        tableau.append(row)

    if nart:
        phase1 = [Fraction(0)] * ncols
        for j in range(2 * n + nslack, ncols):
            phase1[j] = Fraction(-1)
        _simplex(tableau, basis, phase1)
        value = sum(
            tableau[i][ncols] for i in range(m) if basis[i] >= 2 * n + nslack
        )
        if value != 0:
            return INFEASIBLE, None, None
        for i in range(m):
            if basis[i] >= 2 * n + nslack:
                piv = next(
                    (j for j in range(2 * n + nslack) if tableau[i][j] != 0), None
                )
                if piv is None:
                    continue
                p = tableau[i][piv]
                tableau[i] = [x / p for x in tableau[i]]
                for k in range(m):
                    if k != i and tableau[k][piv] != 0:
                        f = tableau[k][piv]
                        tableau[k] = [
                            x - f * y for x, y in zip(tableau[k], tableau[i])
                        ]
                basis[i] = piv
        for i in range(m):
            tableau[i] = tableau[i][: 2 * n + nslack] + [tableau[i][ncols]]
        ncols = 2 * n + nslack

    obj = [Fraction(0)] * ncols
    for j in range(n):
        obj[j] = c[j]
        obj[n + j] = -c[j]
    status = _simplex(tableau, basis, obj)
    if status == UNBOUNDED:
        return UNBOUNDED, None, None
    x = [Fraction(0)] * (2 * n)
    for i in range(m):
        if basis[i] < 2 * n:
            x[basis[i]] = tableau[i][-1]
    point = tuple(x[j] - x[n + j] for j in range(n))
    value = sum((cj * pj for cj, pj in zip(c, point)), Fraction(0))
    return OPTIMAL, point, value


def lp_min(c, a_ub, b_ub):
    status, x, value = lp_max([-fr(ci) for ci in c], a_ub, b_ub)
    return status, x, (None if value is None else -value)


def strict_interior_point(a_rows, offsets, extra_eq=None):
    """Witness x with <a_i, x> + offset_i > 0 for all i, or None.

    Maximizes the worst slack t (capped at 1); optional exact equality
    constraints (rows, rhs) are imposed as paired inequalities.
    Returns (x, t) with t > 0, or None when no strict point exists.
    """
    a_rows = [[fr(x) for x in row] for row in a_rows]
    offsets = [fr(x) for x in offsets]
    n = len(a_rows[0]) if a_rows else (len(extra_eq[0][0]) if extra_eq else 0)
    # variables (x_1..x_n, t); constraints: t - <a_i,x> <= offset_i, t <= 1
    a_ub = []
    b_ub = []
    for row, off in zip(a_rows, offsets):
        a_ub.append([-x for x in row] + [Fraction(1)])
        b_ub.append(off)
    a_ub.append([Fraction(0)] * n + [Fraction(1)])
    b_ub.append(Fraction(1))
    if extra_eq:
        for row, rhs in extra_eq:
            row = [fr(x) for x in row]
            a_ub.append(row + [Fraction(0)])
            b_ub.append(fr(rhs))
            a_ub.append([-x for x in row] + [Fraction(0)])
            b_ub.append(-fr(rhs))
    status, point, value = lp_max(
        [Fraction(0)] * n + [Fraction(1)], a_ub, b_ub
    )
    if status != OPTIMAL or value <= 0:
        return None
    return point[:n], value


def sup_linear(c, a_rows, offsets):
    """sup of c.x over {x : <a_i,x> + offset_i >= 0}.

    Returns (status, value, argmax); value is None when unbounded/infeasible.
    """
    a_ub = [[-fr(x) for x in row] for row in a_rows]
    b_ub = [fr(x) for x in offsets]
    status, x, value = lp_max(c, a_ub, b_ub)
    return status, value, x
