"""Comparison policies: uniform random switching (URS) and the Bayesian
Stackelberg game (BSG), each with a fixed period or an optimized one.

Both baselines use a single destination distribution for every source
state, so they are MSG policies with identical rows and a constant period.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import LinearConstraint, minimize

from .attacker import TIE_TOL
from .bilevel import build_vertex_table, incentive_rows, profile_loss, profiles
from .model import DefenderPolicy, GameInstance, require_valid

KINDS = ("URS", "URS-T", "BSG", "BSG-T")
FEAS_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class BaselineSolution:
    kind: str
    p: np.ndarray
    tau: float
    # long-run cost per unit time
    cost: float
    profile: Tuple[str, ...] = ()

    def policy(self, instance: GameInstance) -> DefenderPolicy:
        n = instance.n
        return DefenderPolicy(np.tile(self.p, (n, 1)), np.full(n, self.tau))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p": self.p.tolist(), "tau": self.tau, "cost": self.cost, "profile": list(self.profile)}


def _prepare(instance: GameInstance, zero_attack_time: bool) -> GameInstance:
    require_valid(instance)
    return instance.with_zero_attack_times() if zero_attack_time else instance


def batch_attack_loss(instance: GameInstance, points: np.ndarray, tau: float) -> np.ndarray:
    """Prior-weighted attack loss at many distributions at once (rows of ``points``).

    Uses the same tie rule as the attacker module: rewards within
    ``TIE_TOL`` of the maximum tie, the defender's lowest loss wins, then
    the lowest attack id.
    """
    total = np.zeros(points.shape[0])
    for t, prior, (u, c) in zip(instance.types, instance.priors, instance.type_tables(tau)):
        vals = points @ u.T
        tie = vals >= vals.max(axis=1, keepdims=True) - TIE_TOL
        loss = points @ c.T
        masked = np.where(tie, loss, np.inf)
        cand = tie & (masked <= masked.min(axis=1, keepdims=True) + TIE_TOL)
        rank = np.argsort(np.argsort(np.array(t.attacks)))
        pick = np.argmin(np.where(cand, rank[None, :], len(rank)), axis=1)
        total += prior * loss[np.arange(points.shape[0]), pick]
    return total


# -- URS ---------------------------------------------------------------------


def _urs_cost(inst: GameInstance, tau: float) -> float:
    n = inst.n
    p = np.full(n, 1.0 / n)
    attack = float(batch_attack_loss(inst, p[None, :], tau)[0]) * n
    return (attack + inst.alpha / n * float(inst.migration.sum())) / (n * tau)


def solve_urs(instance: GameInstance, tau_fixed: float = 1.0, zero_attack_time: bool = False) -> BaselineSolution:
    inst = _prepare(instance, zero_attack_time)
    n = inst.n
    return BaselineSolution("URS", np.full(n, 1.0 / n), float(tau_fixed), _urs_cost(inst, tau_fixed))


def solve_urs_temporal(instance: GameInstance, zero_attack_time: bool = False) -> BaselineSolution:
    """Uniform destinations with the best period on the grid (ties to the smaller period)."""
    inst = _prepare(instance, zero_attack_time)
    best = None
    for t in inst.tau_grid():
        c = _urs_cost(inst, float(t))
        if best is None or c < best[0] - 1e-12 * max(1.0, abs(best[0])):
            best = (c, float(t))
    n = inst.n
    return BaselineSolution("URS-T", np.full(n, 1.0 / n), best[1], best[0])


# -- BSG ---------------------------------------------------------------------


def simplex_grid(n: int, steps: int) -> np.ndarray:
    """All distributions over ``n`` points whose entries are multiples of 1/steps."""
    if n == 1:
        return np.ones((1, 1))
    bars = np.array(list(combinations(range(steps + n - 1), n - 1)), dtype=np.intp)
    edges = np.hstack([np.full((bars.shape[0], 1), -1), bars, np.full((bars.shape[0], 1), steps + n - 1)])
    return (np.diff(edges, axis=1) - 1) / steps


def _line_search(p, d, q, M, alpha, G):
    """Exact minimizer of the quadratic objective along ``p + t d`` inside the region."""
    # feasible t range from p + t d >= 0 and G (p + t d) >= 0
    A = np.concatenate([d, G @ d]) if G.size else d
    b = np.concatenate([p, G @ p]) if G.size else p
    neg = A < -1e-15
    if not neg.any():
        return 0.0
    tmax = float(np.min(-np.maximum(b[neg], 0.0) / A[neg]))
    if tmax <= 0:
        return 0.0
    lin = q @ d + alpha * (p @ (M + M.T) @ d)
    quad = alpha * (d @ M @ d)
    if quad > 1e-15:
        t = min(max(-lin / (2 * quad), 0.0), tmax)
    else:
        t = tmax if lin + quad * tmax < 0 else 0.0
    return t


def _objective(p, q, M, alpha):
    return float(q @ p + alpha * (p @ M @ p))


def _refine(p, q, M, alpha, G, fine):
    """Pairwise mass transfers with exact line search, then a local polish."""
    n = p.shape[0]
    p = p.copy()
    f = _objective(p, q, M, alpha)
    for _ in range(200):
        gained = 0.0
        for j in range(n):
            for k in range(n):
                if j == k or p[j] <= 0:
                    continue
                d = np.zeros(n)
                d[k], d[j] = 1.0, -1.0
                t = _line_search(p, d, q, M, alpha, G)
                if t < fine * 1e-3:
                    continue
                cand = np.clip(p + t * d, 0.0, None)
                cand /= cand.sum()
                fc = _objective(cand, q, M, alpha)
                if fc < f - 1e-15 and (G.size == 0 or np.all(G @ cand >= -FEAS_TOL)):
                    gained += f - fc
                    p, f = cand, fc
        if gained < 1e-13:
            break
    if alpha > 0 and n > 1:
        cons = [LinearConstraint(np.ones((1, n)), 1.0, 1.0)]
        if G.size:
            cons.append(LinearConstraint(G, 0.0, np.inf))
        res = minimize(
            _objective,
            p,
            args=(q, M, alpha),
            jac=lambda x, q, M, alpha: q + alpha * (M + M.T) @ x,
            bounds=[(0.0, 1.0)] * n,
            constraints=cons,
            method="SLSQP",
            options={"ftol": 1e-14, "maxiter": 200},
        )
        x = np.clip(res.x, 0.0, None)
        if x.sum() > 0:
            x /= x.sum()
            fx = _objective(x, q, M, alpha)
            if fx < f - 1e-15 and (G.size == 0 or np.all(G @ x >= -FEAS_TOL)):
                p, f = x, fx
    return p, f


def _bsg_at(inst: GameInstance, tau: float, coarse: int, fine: float):
    """Best per-period objective ``attack loss + alpha p'Mp`` and its argmin at one period."""
    n = inst.n
    M = np.asarray(inst.migration)
    alpha = inst.alpha
    tables = inst.type_tables(tau)
    wr = [u for u, _ in tables]
    wl = [pi * c for pi, (_, c) in zip(inst.priors, tables)]
    grid = simplex_grid(n, coarse)
    table = build_vertex_table(inst, tau)
    best = None
    for prof in profiles(wr, wl):
        G = incentive_rows(wr, prof)
        q = profile_loss(wl, prof)
        inside = np.all(grid @ G.T >= -FEAS_TOL, axis=1) if G.size else np.ones(grid.shape[0], dtype=bool)
        starts = []
        if inside.any():
            pts = grid[inside]
            vals = pts @ q + alpha * np.einsum("ki,ij,kj->k", pts, M, pts)
            starts.append(pts[int(np.argmin(vals))])
        mine = np.all(table.profiles == np.asarray(prof), axis=1)
        if mine.any():
            V = table.vertices[mine]
            vals = V @ q + alpha * np.einsum("ki,ij,kj->k", V, M, V)
            starts.append(V[int(np.argmin(vals))])
        for s in starts:
            p, f = _refine(s, q, M, alpha, G, fine)
            if best is None or f < best[0] - 1e-12:
                best = (f, p, prof)
    f, p, prof = best
    ids = tuple(t.attacks[a] for t, a in zip(inst.types, prof))
    return f, p, ids


def solve_bsg_spatial(
    instance: GameInstance,
    tau_fixed: float = 1.0,
    zero_attack_time: bool = False,
    coarse: int = 60,
    fine: float = 1e-4,
    mccormick_compat: bool = False,
) -> BaselineSolution:
    """One destination distribution for all states, fixed period.

    ``mccormick_compat`` is reserved for a piecewise-linear relaxation of
    the quadratic migration term and is not implemented.
    """
    if mccormick_compat:
        raise NotImplementedError("mccormick_compat is reserved and not implemented")
    if not tau_fixed > 0:
        raise ValueError("tau_fixed must be positive")
    inst = _prepare(instance, zero_attack_time)
    f, p, ids = _bsg_at(inst, float(tau_fixed), coarse, fine)
    return BaselineSolution("BSG", p, float(tau_fixed), float(f / tau_fixed), ids)


def solve_bsg_spatiotemporal(
    instance: GameInstance, zero_attack_time: bool = False, coarse: int = 60, fine: float = 1e-4
) -> BaselineSolution:
    """BSG distribution and period chosen jointly over the period grid."""
    inst = _prepare(instance, zero_attack_time)
    best: Optional[tuple] = None
    for t in inst.tau_grid():
        f, p, ids = _bsg_at(inst, float(t), coarse, fine)
        c = f / t
        if best is None or c < best[0] - 1e-12 * max(1.0, abs(best[0])):
            best = (c, p, float(t), ids)
    c, p, t, ids = best
    return BaselineSolution("BSG-T", p, t, float(c), ids)


def solve_baseline(instance: GameInstance, kind: str, tau_fixed: float = 1.0, zero_attack_time: bool = False) -> BaselineSolution:
    k = kind.upper()
    if k == "URS":
        return solve_urs(instance, tau_fixed, zero_attack_time)
    if k == "URS-T":
        return solve_urs_temporal(instance, zero_attack_time)
    if k == "BSG":
        return solve_bsg_spatial(instance, tau_fixed, zero_attack_time)
    if k == "BSG-T":
        return solve_bsg_spatiotemporal(instance, zero_attack_time)
    raise ValueError(f"unknown baseline {kind!r}; expected one of {KINDS}")
