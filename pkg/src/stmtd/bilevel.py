"""Per-state policy-improvement subproblem.

For a fixed source state ``i`` and period ``tau`` the defender chooses a
row ``p`` minimizing

    sum_l pi_l * sum_j p_j w^l_{j,a^l} C^l_{a^l,j} + sum_j p_j theta_j

while every attacker type plays a best response ``a^l``. The problem is
solved exactly by enumerating response profiles: for a fixed profile the
best-response conditions are linear in ``p`` so each profile is a small
LP over the simplex. Weak incentive inequalities realize the
defender-favoring tie rule.

Since the incentive polytopes depend only on ``tau`` (not on the state,
the value vector or alpha), their vertices can be tabulated once and
reused across iterations; ``VertexTable`` provides that exact shortcut.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .model import GameInstance, Index
from .smdp import resolve_gamma

VALUE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StateSubproblem:
    i: int
    tau: float
    kappa: float
    gamma: float
    theta: np.ndarray
    v_self: float
    # per type: attacker reward-per-period table u[a, j] = w R, and the
    # prior-weighted defender loss table pi_l w C, both over A_l x S
    weighted_reward: Tuple[np.ndarray, ...]
    weighted_loss: Tuple[np.ndarray, ...]
    w: np.ndarray
    attack_ids: Tuple[Tuple[str, ...], ...]
    big_m_floor: float

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def constant(self) -> float:
        """Term of the improvement value that does not depend on ``p``."""
        return self.kappa * (1.0 - self.gamma / self.tau) * self.v_self

    def full_value(self, objective: float) -> float:
        return objective / self.tau + self.constant


@dataclass(frozen=True, eq=False)
class StateSolution:
    p: np.ndarray
    value: float
    objective: float
    profile: Tuple[str, ...]
    positions: Tuple[int, ...]
    infeasible_profiles: int = 0
    profiles_solved: int = 0


def build_subproblem(
    instance: GameInstance, i: Index, tau: float, kappa: float, V, gamma: Optional[float] = None
) -> StateSubproblem:
    i = instance.state_index(i)
    g = resolve_gamma(instance, gamma)
    V = np.asarray(V, dtype=float)
    if V.shape != (instance.n,) or not np.all(np.isfinite(V)):
        raise ValueError("V must be a finite vector with one entry per state")
    theta = instance.alpha * instance.migration[i] + g * kappa * V
    tables = instance.type_tables(tau)
    wr = tuple(u for u, _ in tables)
    wl = tuple(pi * c for pi, (_, c) in zip(instance.priors, tables))
    return StateSubproblem(
        i=i,
        tau=float(tau),
        kappa=float(kappa),
        gamma=g,
        theta=theta,
        v_self=float(V[i]),
        weighted_reward=wr,
        weighted_loss=wl,
        w=instance.overlap(tau),
        attack_ids=tuple(t.attacks for t in instance.types),
        big_m_floor=2.0 * instance.tau_hi * float(instance.reward.max(initial=0.0)),
    )


# -- profile machinery shared by both solution routes ------------------------


def _dominated_positions(u: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Attacks that never need to be considered for one type.

    Attack ``a`` is skipped when some ``b`` gives the attacker at least as
    much everywhere and strictly more somewhere, and ``b`` costs the
    defender no more on the states where the two rewards coincide: ``a``
    can only be a best response on that face, where ``b`` is an equally
    good response that the defender weakly prefers.
    """
    k = u.shape[0]
    skip = np.zeros(k, dtype=bool)
    for a in range(k):
        for b in range(k):
            if a == b:
                continue
            d = u[b] - u[a]
            tol = 1e-9 * np.abs(d).max()
            if tol > 0 and np.all(d >= -tol):
                eq = d <= tol
                if np.all(c[b][eq] <= c[a][eq] + 1e-12):
                    skip[a] = True
                    break
    return skip


def profiles(weighted_reward: Sequence[np.ndarray], weighted_loss: Sequence[np.ndarray], prune: bool = True):
    """Response profiles in lexicographic order, optionally without dominated ones."""
    choices = []
    for u, c in zip(weighted_reward, weighted_loss):
        keep = np.arange(u.shape[0])
        if prune:
            keep = keep[~_dominated_positions(u, c)]
        choices.append(keep.tolist())
    return itertools.product(*choices)


def incentive_rows(weighted_reward: Sequence[np.ndarray], profile: Sequence[int]) -> np.ndarray:
    """Rows ``g`` with ``g @ p >= 0`` iff ``profile`` is a best response to ``p``.

    Rows are scaled to unit max-norm and all-zero rows dropped.
    """
    rows = []
    for u, a in zip(weighted_reward, profile):
        d = u[a][None, :] - np.delete(u, a, axis=0)
        rows.append(d)
    n = weighted_reward[0].shape[1]
    G = np.vstack(rows) if rows else np.zeros((0, n))
    scale = np.abs(G).max(axis=1) if G.size else np.zeros(0)
    G = G[scale > 0] / scale[scale > 0, None]
    return G


def profile_loss(weighted_loss: Sequence[np.ndarray], profile: Sequence[int]) -> np.ndarray:
    out = np.zeros(weighted_loss[0].shape[1])
    for c, a in zip(weighted_loss, profile):
        out += c[a]
    return out


def solve_state(sub: StateSubproblem, prune: bool = True) -> StateSolution:
    """Exact optimum of the bilevel subproblem by profile enumeration."""
    best = None
    infeasible = 0
    solved = 0
    for prof in profiles(sub.weighted_reward, sub.weighted_loss, prune):
        f = profile_loss(sub.weighted_loss, prof) + sub.theta
        G = incentive_rows(sub.weighted_reward, prof)
        status, p, obj = _kernels.lp_simplex(f, G)
        solved += 1
        if status != _kernels.OPTIMAL:
            infeasible += 1
            continue
        if best is None or obj < best[0] - VALUE_TOL:
            best = (obj, p, prof)
    if best is None:
        # unreachable for valid data: the true best response to any p is a feasible profile
        raise RuntimeError("no feasible response profile")
    obj, p, prof = best
    return StateSolution(
        p=p,
        value=sub.full_value(obj),
        objective=obj,
        profile=tuple(ids[a] for ids, a in zip(sub.attack_ids, prof)),
        positions=tuple(int(a) for a in prof),
        infeasible_profiles=infeasible,
        profiles_solved=solved,
    )


# -- tabulated vertices --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VertexTable:
    """All vertices of every feasible profile polytope at one period ``tau``.

    ``attack_loss[k]`` is the prior-weighted attack loss of vertex ``k``
    under its profile; the subproblem objective at vertex ``k`` is
    ``attack_loss[k] + vertices[k] @ theta``.
    """

    tau: float
    vertices: np.ndarray
    attack_loss: np.ndarray
    profiles: np.ndarray
    infeasible_profiles: int

    def __len__(self) -> int:
        return self.vertices.shape[0]


def build_vertex_table(instance: GameInstance, tau: float, prune: bool = True) -> VertexTable:
    tables = instance.type_tables(tau)
    wr = [u for u, _ in tables]
    wl = [pi * c for pi, (_, c) in zip(instance.priors, tables)]
    verts, losses, profs = [], [], []
    infeasible = 0
    for prof in profiles(wr, wl, prune):
        # + 0.0 turns clipped negative zeros into plain zeros
        V = _kernels.polytope_vertices(incentive_rows(wr, prof), instance.n) + 0.0
        if V.shape[0] == 0:
            infeasible += 1
            continue
        verts.append(V)
        losses.append(V @ profile_loss(wl, prof))
        profs.append(np.tile(np.asarray(prof, dtype=np.intp), (V.shape[0], 1)))
    return VertexTable(
        tau=float(tau),
        vertices=np.vstack(verts),
        attack_loss=np.concatenate(losses),
        profiles=np.vstack(profs),
        infeasible_profiles=infeasible,
    )


_TABLE_CACHE: Dict[tuple, List[VertexTable]] = {}
_TABLE_CACHE_SIZE = 16


def vertex_tables(instance: GameInstance, prune: bool = True) -> List[VertexTable]:
    """Vertex tables for every grid period, cached across alpha/gamma changes."""
    key = (instance.structure_key(), prune)
    hit = _TABLE_CACHE.get(key)
    if hit is None:
        hit = [build_vertex_table(instance, t, prune) for t in instance.tau_grid()]
        if len(_TABLE_CACHE) >= _TABLE_CACHE_SIZE:
            _TABLE_CACHE.pop(next(iter(_TABLE_CACHE)))
        _TABLE_CACHE[key] = hit
    return hit


def solve_state_vertices(sub: StateSubproblem, table: VertexTable) -> StateSolution:
    """Same optimum as ``solve_state`` read off a precomputed vertex table."""
    vals = table.attack_loss + table.vertices @ sub.theta
    k = int(np.flatnonzero(vals <= vals.min() + VALUE_TOL)[0])
    prof = table.profiles[k]
    return StateSolution(
        p=table.vertices[k].copy(),
        value=sub.full_value(float(vals[k])),
        objective=float(vals[k]),
        profile=tuple(ids[a] for ids, a in zip(sub.attack_ids, prof)),
        positions=tuple(int(a) for a in prof),
        infeasible_profiles=table.infeasible_profiles,
    )


# -- MIQP export --------------------------------------------------------------


def _num(x: float) -> str:
    return repr(float(x))


def _linear(terms) -> str:
    parts = []
    for coef, name in terms:
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {_num(abs(coef))} {name}")
    if not parts:
        return f"0 {terms[0][1]}"
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


def export_miqp(sub: StateSubproblem, B: Optional[float] = None) -> str:
    """The big-M mixed-integer quadratic program of one subproblem, in CPLEX LP format.

    Constant objective terms are omitted; the header comment records how to
    recover the full improvement value from the optimum.
    """
    if B is None:
        B = sub.big_m_floor if sub.big_m_floor > 0 else 1.0
    if B < sub.big_m_floor:
        raise ValueError(f"big-M {B} is below the safe bound {sub.big_m_floor}")
    n = sub.n
    p = [f"p{j}" for j in range(n)]
    lines = [
        f"\\ state {sub.i}, tau {sub.tau!r}, kappa {sub.kappa!r}, gamma {sub.gamma!r}",
        f"\\ full value = objective / {sub.tau!r} + {sub.constant!r}",
        "Minimize",
    ]
    quad = []
    for l, c in enumerate(sub.weighted_loss):
        for a in range(c.shape[0]):
            for j in range(n):
                if c[a, j] != 0:
                    quad.append(f"{_num(2.0 * c[a, j])} {p[j]} * n{l}_{a}")
    obj = " obj: " + _linear([(sub.theta[j], p[j]) for j in range(n)])
    if quad:
        obj += " + [ " + " + ".join(quad) + " ] / 2"
    lines.append(obj)
    lines.append("Subject To")
    lines.append(" simplex: " + " + ".join(p) + " = 1")
    for l, u in enumerate(sub.weighted_reward):
        k = u.shape[0]
        lines.append(f" pick{l}: " + " + ".join(f"n{l}_{a}" for a in range(k)) + " = 1")
        for a in range(k):
            body = _linear([(1.0, f"v{l}")] + [(-u[a, j], p[j]) for j in range(n)])
            lines.append(f" lo{l}_{a}: {body} >= 0")
            lines.append(f" hi{l}_{a}: {body} + {_num(B)} n{l}_{a} <= {_num(B)}")
    lines.append("Bounds")
    for j in range(n):
        lines.append(f" 0 <= {p[j]} <= 1")
    for l in range(len(sub.weighted_reward)):
        lines.append(f" v{l} free")
    lines.append("Binaries")
    for l, u in enumerate(sub.weighted_reward):
        lines.append(" " + " ".join(f"n{l}_{a}" for a in range(u.shape[0])))
    lines.append("End")
    return "\n".join(lines) + "\n"


def miqp_filename(sub: StateSubproblem) -> str:
    return f"sub_i{sub.i}_tau{sub.tau:g}.lp"
