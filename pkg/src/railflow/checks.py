"""Feasibility auditing of solved models, independent of the solver path.

Activities are evaluated straight from the stored constraints and a value
vector, so every number a report or test sees can be reproduced from the
solution alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import TimeExpandedModel


@dataclass(frozen=True)
class ConstraintSystem:
    """Vectorized activity evaluation for all constraints of one model."""

    starts: np.ndarray
    var_idx: np.ndarray
    coefs: np.ndarray
    rhs: np.ndarray
    sense: np.ndarray  # -1 for <=, 0 for =, +1 for >=

    @classmethod
    def from_model(cls, model: TimeExpandedModel) -> "ConstraintSystem":
        starts = np.zeros(len(model.constraints) + 1, dtype=int)
        var_idx: list[int] = []
        coefs: list[float] = []
        rhs = np.zeros(len(model.constraints))
        sense = np.zeros(len(model.constraints), dtype=int)
        sense_of = {"<=": -1, "=": 0, ">=": 1}
        for k, row in enumerate(model.constraints):
            for idx, coef in row.terms:
                var_idx.append(idx)
                coefs.append(coef)
            starts[k + 1] = len(var_idx)
            rhs[k] = row.rhs
            sense[k] = sense_of[row.relation]
        return cls(
            starts=starts,
            var_idx=np.array(var_idx, dtype=int),
            coefs=np.array(coefs, dtype=float),
            rhs=rhs,
            sense=sense,
        )

    def activities(self, values: np.ndarray) -> np.ndarray:
        n = len(self.rhs)
        if n == 0:
            return np.zeros(0)
        products = self.coefs * values[self.var_idx]
        if not products.size:
            return np.zeros(n)
        # reduceat needs indices < len(products); trailing empty segments are
        # clamped and then zeroed through the empty-segment mask.
        idx = np.minimum(self.starts[:-1], products.size - 1)
        totals = np.add.reduceat(products, idx)
        empty = self.starts[:-1] == self.starts[1:]
        if empty.any():
            totals[empty] = 0.0
        return totals

    def violations(self, values: np.ndarray) -> np.ndarray:
        """Per-constraint infeasibility amount (0 when satisfied)."""
        act = self.activities(values)
        over = act - self.rhs
        out = np.where(self.sense == 0, np.abs(over), 0.0)
        out = np.where(self.sense == -1, np.maximum(over, 0.0), out)
        out = np.where(self.sense == 1, np.maximum(-over, 0.0), out)
        return out


def constraint_family(name: str) -> str:
    return name.split("[", 1)[0]


def max_violation_by_family(model: TimeExpandedModel, values: np.ndarray) -> dict[str, float]:
    system = ConstraintSystem.from_model(model)
    worst: dict[str, float] = {}
    for row, violation in zip(model.constraints, system.violations(values)):
        family = constraint_family(row.name)
        if violation > worst.get(family, 0.0):
            worst[family] = float(violation)
    return worst


def integrality_violation(model: TimeExpandedModel, values: np.ndarray) -> float:
    worst = 0.0
    for i, var in enumerate(model.variables):
        if var.integer:
            worst = max(worst, abs(values[i] - round(values[i])))
    return worst


def verify_solution(
    model: TimeExpandedModel,
    values: np.ndarray,
    feasibility: float = 1e-7,
    integrality: float | None = 1e-6,
) -> list[str]:
    """All constraint, bound and integrality breaches beyond the tolerances."""
    issues: list[str] = []
    system = ConstraintSystem.from_model(model)
    violation = system.violations(values)
    for k in np.nonzero(violation > feasibility)[0]:
        issues.append(f"{model.constraints[k].name}: violated by {violation[k]:g}")
    for i, var in enumerate(model.variables):
        if values[i] < var.lb - feasibility or values[i] > var.ub + feasibility:
            issues.append(f"{var.name}: value {values[i]:g} outside [{var.lb:g}, {var.ub:g}]")
        if integrality is not None and var.integer and abs(values[i] - round(values[i])) > integrality:
            issues.append(f"{var.name}: value {values[i]:g} not integral")
    return issues
