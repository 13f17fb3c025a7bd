"""Solve reports and gap metrics shared by the fixed-distribution and DRO solvers."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .types import OrderPlan

TRACE_COLUMNS = ("k", "subset_size", "theta_k", "C_k", "wall_ms")


@dataclass
class SolveReport:
    """Solution, honest worst-case evaluation and iteration trace of a solve.

    `worst_param` / `objective` always describe the worst case over the full
    ambiguity set (for fixed-distribution solves, the model itself);
    `selected_param` is the parameter the algorithm itself settled on, which
    for the cutting-surface loop may come from the extreme subset only.
    """

    plan: OrderPlan
    worst_param: np.ndarray
    objective: float
    iterations: list = field(default_factory=list)
    timing: float = 0.0
    flags: dict = field(default_factory=dict)
    selected_param: np.ndarray | None = None

    def to_dict(self) -> dict:
        doc = {
            "plan": [float(v) for v in self.plan.q],
            "worst_param": [float(v) for v in np.asarray(self.worst_param)],
            "objective": float(self.objective),
            "iterations": self.iterations,
            "timing": float(self.timing),
            "flags": dict(self.flags),
        }
        if self.selected_param is not None:
            doc["selected_param"] = [float(v) for v in np.asarray(self.selected_param)]
        return doc

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def write_trace_csv(self, path) -> None:
        """Iteration trace as CSV (columns: k, subset_size, theta_k, C_k, wall_ms)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for entry in self.iterations:
                writer.writerow([entry.get(c, "") for c in TRACE_COLUMNS])


@dataclass
class GapMetrics:
    """Percentage gaps; None marks a metric whose reference denominator was zero."""

    omega_gap_pct: float | None = None
    q_gap_pct: float | None = None
    ape_pct: float | None = None
    optimality_gap_pct: float | None = None

    def to_dict(self) -> dict:
        return {
            "omega_gap_pct": self.omega_gap_pct,
            "q_gap_pct": self.q_gap_pct,
            "ape_pct": self.ape_pct,
            "optimality_gap_pct": self.optimality_gap_pct,
        }
