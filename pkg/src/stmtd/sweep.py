"""Parameter sweeps over the migration scale or the updating cost."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, TextIO

import numpy as np

from .baselines import solve_bsg_spatial, solve_bsg_spatiotemporal, solve_urs, solve_urs_temporal
from .model import GameInstance
from .solver import SolverConfig, relative_value_iteration, value_iteration

log = logging.getLogger(__name__)

CSV_HEADER = ("solver", "alpha", "lambda", "tau_star_per_state", "iterations", "epsilon_certificate", "wall_time_ms")
SOLVERS = ("MSG", "BSG", "BSG-T", "URS", "URS-T")


@dataclass
class SweepRow:
    solver: str
    # the swept value: alpha, or the updating cost in updating-cost sweeps
    alpha: float
    lam: float
    tau_star: List[float]
    iterations: Optional[int]
    epsilon_certificate: Optional[float]
    wall_time_ms: float
    policy: Optional[list] = None
    error: Optional[str] = None

    def csv_fields(self) -> list:
        return [
            self.solver,
            f"{self.alpha:g}",
            repr(float(self.lam)),
            ";".join(f"{t:g}" for t in self.tau_star),
            "" if self.iterations is None else str(self.iterations),
            "" if self.epsilon_certificate is None else repr(self.epsilon_certificate),
            f"{self.wall_time_ms:.3f}",
        ]


def parse_range(spec: str) -> List[float]:
    """``a0:a1:step`` inclusive of a1 (to rounding), or a single number."""
    parts = [float(x) for x in spec.split(":")]
    if len(parts) == 1:
        return parts
    if len(parts) != 3 or parts[2] <= 0:
        raise ValueError(f"expected a0:a1:step, got {spec!r}")
    a0, a1, step = parts
    count = int(math.floor((a1 - a0) / step + 1e-9)) + 1
    return [round(a0 + k * step, 12) for k in range(count)]


def parse_list(spec: str) -> List[float]:
    return [float(x) for x in spec.split(",") if x.strip()]


def solve_point(
    instance: GameInstance,
    solver: str,
    cfg: Optional[SolverConfig] = None,
    relative: bool = False,
    tau_fixed: float = 1.0,
    label: Optional[float] = None,
) -> SweepRow:
    n = instance.n
    label = instance.alpha if label is None else label
    start = time.perf_counter()
    try:
        if solver == "MSG":
            run = relative_value_iteration if relative else value_iteration
            rep = run(instance, cfg or SolverConfig())
            return SweepRow(
                "MSG",
                label,
                rep.lam,
                rep.policy.tau.tolist(),
                rep.iterations,
                rep.epsilon_certificate,
                (time.perf_counter() - start) * 1e3,
                rep.policy.P.tolist(),
            )
        if solver == "BSG":
            sol = solve_bsg_spatial(instance, tau_fixed)
        elif solver == "BSG-T":
            sol = solve_bsg_spatiotemporal(instance)
        elif solver == "URS":
            sol = solve_urs(instance, tau_fixed)
        elif solver == "URS-T":
            sol = solve_urs_temporal(instance)
        else:
            raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
        return SweepRow(
            solver, label, sol.cost, [sol.tau] * n, None, None, (time.perf_counter() - start) * 1e3, [sol.p.tolist()] * n
        )
    except Exception as exc:  # recorded per row, the sweep goes on
        log.warning("%s at %g failed: %s", solver, label, exc)
        return SweepRow(solver, label, float("nan"), [], None, None, (time.perf_counter() - start) * 1e3, error=str(exc))


def run_sweep(
    instance: GameInstance,
    alphas: Optional[Sequence[float]] = None,
    updating_costs: Optional[Sequence[float]] = None,
    solvers: Iterable[str] = ("MSG", "BSG", "URS"),
    cfg: Optional[SolverConfig] = None,
    relative: bool = False,
    tau_fixed: float = 1.0,
) -> List[SweepRow]:
    """One row per (sweep point, solver), in sweep order then solver order."""
    if (alphas is None) == (updating_costs is None):
        raise ValueError("give exactly one of alphas or updating_costs")
    solvers = list(solvers)
    rows = []
    if alphas is not None:
        points = [(float(a), instance.with_alpha(float(a))) for a in alphas]
    else:
        points = [(float(c), instance.with_updating_cost(float(c))) for c in updating_costs]
    for label, inst in points:
        for s in solvers:
            rows.append(solve_point(inst, s, cfg, relative, tau_fixed, label))
    return rows


def write_csv(rows: Sequence[SweepRow], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.csv_fields())


def rows_by_solver(rows: Sequence[SweepRow]) -> dict:
    out: dict = {}
    for r in rows:
        out.setdefault(r.solver, []).append(r)
    return out


def lambdas(rows: Sequence[SweepRow], solver: str) -> np.ndarray:
    return np.array([r.lam for r in rows if r.solver == solver])
