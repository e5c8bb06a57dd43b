"""Standard-form conversion and a dense two-phase primal simplex.

The converter folds singleton rows and fixed variables into bounds exactly
(no tolerance-based presolve), shifts or splits variables so every remaining
column is nonnegative, and keeps a bijection back to the model variables.
The simplex works on a dense tableau with a largest-coefficient pivot rule
and Bland's rule as the anti-cycling fallback; the final basic solution is
recomputed from a fresh factorization of the basis so that residuals are at
machine precision rather than accumulated tableau error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .model import LinearConstraint, TimeExpandedModel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class Tolerances:
    """Numeric tolerances; defaults suit data made of small integers and fractions."""

    feasibility: float = 1e-7
    integrality: float = 1e-6
    mip_gap: float = 1e-6
    pivot: float = 1e-9
    max_iterations: int = 200_000
    max_nodes: int = 5_000
    bland_after: int = 40


class InfeasibleModel(Exception):
    """Conversion already proves the model infeasible (conflicting fixings)."""


@dataclass
class StandardFormLP:
    """min c.x + constant s.t. A x (rel) b, x >= 0, with model-variable mapping.

    Each live model variable maps to one column (offset + column value) or, if
    free, to a plus/minus column pair.  Fixed variables carry their value in
    offset with no column.
    """

    c: np.ndarray
    A: np.ndarray
    relations: tuple[str, ...]
    b: np.ndarray
    row_names: tuple[str, ...]
    objective_constant: float
    n_model_vars: int
    offset: np.ndarray          # per model variable, additive constant
    pos_col: np.ndarray         # per model variable, +1 column index or -1
    neg_col: np.ndarray         # per model variable, -1 column index or -1

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    def model_values(self, x: np.ndarray) -> np.ndarray:
        values = self.offset.copy()
        pos = self.pos_col >= 0
        values[pos] += x[self.pos_col[pos]]
        neg = self.neg_col >= 0
        values[neg] -= x[self.neg_col[neg]]
        return values


def build_standard_form(
    model: TimeExpandedModel,
    extra_rows: Sequence[LinearConstraint] = (),
    extra_fixes: Mapping[int, float] | None = None,
    objective_override: Mapping[int, float] | None = None,
) -> StandardFormLP:
    """Convert a model (plus branching rows/fixings) to nonnegative standard form.

    Raises InfeasibleModel when bound folding alone proves infeasibility.
    """
    n_vars = len(model.variables)
    lo = np.array([v.lb for v in model.variables], dtype=float)
    hi = np.array([v.ub for v in model.variables], dtype=float)
    if extra_fixes:
        for idx, value in extra_fixes.items():
            lo[idx] = max(lo[idx], value)
            hi[idx] = min(hi[idx], value)

    all_rows = list(model.constraints) + list(extra_rows)
    multi_rows: list[LinearConstraint] = []
    for row in all_rows:
        if len(row.terms) != 1:
            multi_rows.append(row)
            continue
        idx, coef = row.terms[0]
        bound = row.rhs / coef
        relation = row.relation
        if coef < 0 and relation != "=":
            relation = "<=" if relation == ">=" else ">="
        if relation == "=":
            lo[idx] = max(lo[idx], bound)
            hi[idx] = min(hi[idx], bound)
        elif relation == "<=":
            hi[idx] = min(hi[idx], bound)
        else:
            lo[idx] = max(lo[idx], bound)

    bad = np.nonzero(lo > hi + 1e-9)[0]
    if bad.size:
        names = ", ".join(model.variables[i].name for i in bad[:5])
        raise InfeasibleModel(f"conflicting bounds on {names}")

    fixed = np.zeros(n_vars, dtype=bool)
    offset = np.zeros(n_vars, dtype=float)
    for i in range(n_vars):
        if hi[i] - lo[i] <= 1e-12 and math.isfinite(lo[i]):
            fixed[i] = True
            offset[i] = lo[i]

    objective = dict(objective_override) if objective_override is not None else dict(model.objective)

    pos_col = np.full(n_vars, -1, dtype=int)
    neg_col = np.full(n_vars, -1, dtype=int)
    c_list: list[float] = []
    # upper bounds become rows over the live columns: (terms, rhs, name)
    ub_rows: list[tuple[tuple[tuple[int, float], ...], float, str]] = []
    obj_constant = 0.0
    for i in range(n_vars):
        if fixed[i]:
            obj_constant += objective.get(i, 0.0) * offset[i]
            continue
        coef = objective.get(i, 0.0)
        name = model.variables[i].name
        if lo[i] == -math.inf:
            pos_col[i] = len(c_list)
            c_list.append(coef)
            neg_col[i] = len(c_list)
            c_list.append(-coef)
            if math.isfinite(hi[i]):
                ub_rows.append(
                    (((pos_col[i], 1.0), (neg_col[i], -1.0)), hi[i], name)
                )
        else:
            offset[i] = lo[i]
            obj_constant += coef * lo[i]
            pos_col[i] = len(c_list)
            c_list.append(coef)
            if math.isfinite(hi[i]):
                ub_rows.append((((pos_col[i], 1.0),), hi[i] - lo[i], name))

    rows_a: list[tuple[np.ndarray, np.ndarray]] = []
    relations: list[str] = []
    rhs: list[float] = []
    names: list[str] = []
    for row in multi_rows:
        cols: list[int] = []
        vals: list[float] = []
        adj = row.rhs
        for idx, coef in row.terms:
            if fixed[idx]:
                adj -= coef * offset[idx]
                continue
            if pos_col[idx] >= 0 and neg_col[idx] >= 0:
                cols.append(pos_col[idx])
                vals.append(coef)
                cols.append(neg_col[idx])
                vals.append(-coef)
            else:
                adj -= coef * offset[idx]
                cols.append(pos_col[idx])
                vals.append(coef)
        if not cols:
            violated = (
                (row.relation == "=" and abs(adj) > 1e-9)
                or (row.relation == "<=" and adj < -1e-9)
                or (row.relation == ">=" and adj > 1e-9)
            )
            if violated:
                raise InfeasibleModel(f"constraint {row.name} is violated by fixed variables")
            continue
        rows_a.append((np.array(cols, dtype=int), np.array(vals, dtype=float)))
        relations.append(row.relation)
        rhs.append(adj)
        names.append(row.name)
    for terms, bound, varname in ub_rows:
        if len(terms) == 1 and bound < -1e-9:
            # shifted nonnegative column: its span collapsed below zero
            raise InfeasibleModel(f"upper bound below lower bound for {varname}")
        rows_a.append(
            (
                np.array([col for col, _ in terms], dtype=int),
                np.array([v for _, v in terms], dtype=float),
            )
        )
        relations.append("<=")
        rhs.append(bound)
        names.append(f"__ub[{varname}]")

    n_cols = len(c_list)
    A = np.zeros((len(rows_a), n_cols), dtype=float)
    for r, (cols, vals) in enumerate(rows_a):
        np.add.at(A[r], cols, vals)
    return StandardFormLP(
        c=np.array(c_list, dtype=float),
        A=A,
        relations=tuple(relations),
        b=np.array(rhs, dtype=float),
        row_names=tuple(names),
        objective_constant=obj_constant,
        n_model_vars=n_vars,
        offset=offset,
        pos_col=pos_col,
        neg_col=neg_col,
    )


@dataclass
class LpSolution:
    status: str
    objective: Optional[float]
    x: Optional[np.ndarray]
    iterations: int
    dual_objective: Optional[float] = None


def solve_lp(sf: StandardFormLP, tol: Tolerances | None = None) -> LpSolution:
    """Two-phase primal simplex on the standard-form problem.

    Artificial variables are kept logical: a basis slot either holds a real
    column or marks its row as artificial.  Since an artificial never
    re-enters the basis, its column values are never needed, which keeps the
    tableau a quarter slimmer and free of artificial fill-in.  Pivot updates
    touch only the nonzero block of the rank-1 correction, falling back to a
    full update once the tableau densifies.
    """
    if tol is None:
        tol = Tolerances()
    m, n = sf.n_rows, sf.n_cols

    if n == 0:
        return LpSolution(OPTIMAL, sf.objective_constant, np.zeros(0), 0, sf.objective_constant)
    if m == 0:
        if np.any(sf.c < -tol.pivot):
            return LpSolution(UNBOUNDED, None, None, 0)
        return LpSolution(OPTIMAL, sf.objective_constant, np.zeros(n), 0, sf.objective_constant)

    # Orient every row with a nonnegative right-hand side; <= rows get a
    # slack column, = and >= rows start from a logical artificial.
    A = sf.A.copy()
    b = sf.b.copy()
    rel = list(sf.relations)
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1.0
            b[i] = -b[i]
            if rel[i] != "=":
                rel[i] = "<=" if rel[i] == ">=" else ">="

    slack_rows = [i for i in range(m) if rel[i] == "<="]
    surplus_rows = [i for i in range(m) if rel[i] == ">="]
    art_rows = [i for i in range(m) if rel[i] != "<="]
    n_slack = len(slack_rows)
    n_surplus = len(surplus_rows)
    n_art = len(art_rows)
    ncols = n + n_slack + n_surplus
    width = ncols + 1

    # Tableau rows 0..m-1 are constraints; row m is the phase-2 objective,
    # row m+1 the phase-1 objective.
    T = np.zeros((m + 2, width), dtype=float)
    T[:m, :n] = A
    T[:m, -1] = b
    col = n
    slack_col_of_row = {}
    for i in slack_rows:
        T[i, col] = 1.0
        slack_col_of_row[i] = col
        col += 1
    surplus_col_of_row = {}
    for i in surplus_rows:
        T[i, col] = -1.0
        surplus_col_of_row[i] = col
        col += 1

    basis = np.empty(m, dtype=int)
    basic_artificial = np.zeros(m, dtype=bool)
    for i in slack_rows:
        basis[i] = slack_col_of_row[i]
    for i in art_rows:
        basis[i] = -1
        basic_artificial[i] = True

    T[m, :n] = sf.c
    if n_art:
        art_mask = np.zeros(m, dtype=bool)
        art_mask[art_rows] = True
        T[m + 1, :] = -T[:m][art_mask].sum(axis=0)

    # Leaving-variable order for Bland's rule: artificials rank before real
    # columns so they are preferred out on ties (fixed, deterministic order).
    leave_rank = np.where(basic_artificial, -1 - np.arange(m), basis)

    iterations = 0
    dense_update = False

    def pivot(p: int, q: int) -> None:
        nonlocal dense_update
        T[p, :] /= T[p, q]
        row = T[p, :]
        row[np.abs(row) < 1e-13] = 0.0
        row[q] = 1.0
        column = T[:, q].copy()
        column[p] = 0.0
        if not dense_update:
            nzr = np.nonzero(row)[0]
            nzc = np.nonzero(column)[0]
            if len(nzr) * len(nzc) < 0.35 * T.size:
                T[np.ix_(nzc, nzr)] -= np.outer(column[nzc], row[nzr])
            else:
                dense_update = True
        if dense_update:
            T[...] -= np.outer(column, row)
        T[:, q] = 0.0
        T[p, q] = 1.0

    def run_phase(cost_row: int, phase_one: bool) -> str:
        nonlocal iterations
        bland = False
        stall = 0
        while True:
            if iterations >= tol.max_iterations:
                return ITERATION_LIMIT
            costs = T[cost_row, :ncols]
            if bland:
                neg = np.nonzero(costs < -tol.pivot)[0]
                if neg.size == 0:
                    return OPTIMAL
                q = int(neg[0])
            else:
                q = int(np.argmin(costs))
                if costs[q] >= -tol.pivot:
                    return OPTIMAL

            column = T[:m, q]
            # Keep basic artificials at zero: rows where the entering column
            # would increase one (negative entry) are pivoted on immediately,
            # a zero-length step that drives the artificial out for good.
            # Positive entries need no guard; the ratio test picks them at
            # ratio zero by itself.
            if not phase_one and basic_artificial.any():
                guard = np.nonzero(basic_artificial & (column < -tol.pivot))[0]
                if guard.size:
                    entries = column[guard]
                    strongest = entries.min()
                    pick = guard[entries <= strongest + 1e-12]
                    p = int(pick[np.argmin(leave_rank[pick])])
                    basic_artificial[p] = False
                    basis[p] = q
                    leave_rank[p] = q
                    pivot(p, q)
                    iterations += 1
                    continue

            positive = column > tol.pivot
            if not positive.any():
                return UNBOUNDED if not phase_one else OPTIMAL
            ratios = np.full(m, np.inf)
            ratios[positive] = T[:m, -1][positive] / column[positive]
            best = ratios.min()
            ties = np.nonzero(ratios <= best + 1e-12)[0]
            p = int(ties[np.argmin(leave_rank[ties])])
            basic_artificial[p] = False
            basis[p] = q
            leave_rank[p] = q
            pivot(p, q)
            iterations += 1
            if best <= 1e-12:
                stall += 1
                if stall > tol.bland_after:
                    bland = True
            else:
                stall = 0
                bland = False

    if n_art:
        outcome = run_phase(m + 1, phase_one=True)
        if outcome == ITERATION_LIMIT:
            return LpSolution(ITERATION_LIMIT, None, None, iterations)
        if T[m + 1, -1] < -(tol.feasibility * max(1.0, float(np.abs(b).max(initial=1.0)))):
            return LpSolution(INFEASIBLE, None, None, iterations)

    outcome = run_phase(m, phase_one=False)
    if outcome == ITERATION_LIMIT:
        return LpSolution(ITERATION_LIMIT, None, None, iterations)
    if outcome == UNBOUNDED:
        return LpSolution(UNBOUNDED, None, None, iterations)

    # Recompute the basic solution from the original data: one fresh solve
    # wipes out the error accumulated across thousands of tableau updates.
    equality_matrix = np.zeros((m, ncols), dtype=float)
    equality_matrix[:, :n] = A
    for i in slack_rows:
        equality_matrix[i, slack_col_of_row[i]] = 1.0
    for i in surplus_rows:
        equality_matrix[i, surplus_col_of_row[i]] = -1.0

    basis_matrix = np.zeros((m, m), dtype=float)
    real = ~basic_artificial
    basis_matrix[:, real] = equality_matrix[:, basis[real]]
    for i in np.nonzero(basic_artificial)[0]:
        basis_matrix[i, i] = 1.0

    x_full = np.zeros(ncols, dtype=float)
    dual_objective = None
    try:
        x_basic = np.linalg.solve(basis_matrix, b)
        residual = float(np.abs(basis_matrix @ x_basic - b).max(initial=0.0))
        if residual > 1e-6:
            x_basic = T[:m, -1].copy()
        costs_full = np.zeros(ncols)
        costs_full[:n] = sf.c
        basic_costs = np.zeros(m)
        basic_costs[real] = costs_full[basis[real]]
        y = np.linalg.solve(basis_matrix.T, basic_costs)
        dual_objective = float(y @ b) + sf.objective_constant
    except np.linalg.LinAlgError:
        x_basic = T[:m, -1].copy()
    x_full[basis[real]] = x_basic[real]

    np.clip(x_full, 0.0, None, out=x_full)
    x = x_full[:n]
    objective = float(sf.c @ x) + sf.objective_constant
    return LpSolution(OPTIMAL, objective, x, iterations, dual_objective)


def solve_model_lp(
    model: TimeExpandedModel,
    tol: Tolerances | None = None,
    extra_rows: Sequence[LinearConstraint] = (),
    extra_fixes: Mapping[int, float] | None = None,
    objective_override: Mapping[int, float] | None = None,
) -> tuple[LpSolution, Optional[np.ndarray]]:
    """Convert, solve and map the solution back onto the model variables."""
    try:
        sf = build_standard_form(model, extra_rows, extra_fixes, objective_override)
    except InfeasibleModel:
        return LpSolution(INFEASIBLE, None, None, 0), None
    solution = solve_lp(sf, tol)
    if solution.status != OPTIMAL:
        return solution, None
    values = sf.model_values(solution.x)
    values[np.abs(values) < 1e-11] = 0.0
    return solution, values
