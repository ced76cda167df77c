"""Defender stage costs, the SMDP-to-DTMDP data transformation, and exact
average-cost evaluation of stationary policies (uni- or multichain)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.sparse.csgraph import connected_components

from .attacker import attack_loss_given_response, best_response_positions
from .model import DefenderPolicy, GameInstance, Index

EDGE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DtmdpView:
    c_tilde: np.ndarray
    p_tilde: np.ndarray
    gamma: float


@dataclass(frozen=True, eq=False)
class PolicyEvaluation:
    avg_cost: np.ndarray
    recurrent_classes: Tuple[Tuple[int, ...], ...]
    is_unichain: bool
    stage_costs: np.ndarray

    @property
    def worst(self) -> float:
        return float(self.avg_cost.max())


def _check_row(instance: GameInstance, p_i) -> np.ndarray:
    p = np.asarray(p_i, dtype=float)
    if p.shape != (instance.n,):
        raise ValueError(f"probability row must have length {instance.n}")
    if np.any(p < -1e-9) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("p_i must be a probability row")
    return p


def attack_loss(instance: GameInstance, p_i, tau_i: float) -> float:
    """Prior-weighted expected attack loss of one period under best responses."""
    p = np.asarray(p_i, dtype=float)
    pos = best_response_positions(instance, p, tau_i)
    return attack_loss_given_response(instance, p, tau_i, pos)


def stage_cost(instance: GameInstance, i: Index, p_i, tau_i: float) -> float:
    """Expected cost of one defending period started from state ``i``."""
    i = instance.state_index(i)
    p = _check_row(instance, p_i)
    return attack_loss(instance, p, tau_i) + instance.alpha * float(p @ instance.migration[i])


def default_gamma(instance: GameInstance) -> float:
    return instance.tau_lo / 2.0


def resolve_gamma(instance: GameInstance, gamma: Optional[float] = None) -> float:
    g = gamma if gamma is not None else instance.gamma
    if g is None:
        g = default_gamma(instance)
    if not 0 < g < instance.tau_lo:
        raise ValueError(f"gamma must lie in (0, tau_lo={instance.tau_lo}), got {g}")
    return float(g)


def transform_row(i: int, p_i: np.ndarray, tau_i: float, gamma: float) -> np.ndarray:
    row = gamma * np.asarray(p_i, dtype=float) / tau_i
    row[i] += 1.0 - gamma / tau_i
    return row


def transform_action(instance: GameInstance, i: Index, p_i, tau_i: float, gamma: float) -> Tuple[float, np.ndarray]:
    i = instance.state_index(i)
    if not 0 < gamma < instance.tau_lo:
        raise ValueError(f"gamma must lie in (0, tau_lo={instance.tau_lo}), got {gamma}")
    p = _check_row(instance, p_i)
    return stage_cost(instance, i, p, tau_i) / tau_i, transform_row(i, p, tau_i, gamma)


def policy_stage_costs(instance: GameInstance, policy: DefenderPolicy) -> np.ndarray:
    return np.array([stage_cost(instance, i, policy.P[i], policy.tau[i]) for i in range(instance.n)])


def transform_policy(instance: GameInstance, policy: DefenderPolicy, gamma: Optional[float] = None) -> DtmdpView:
    g = resolve_gamma(instance, gamma)
    c = policy_stage_costs(instance, policy) / policy.tau
    rows = np.array([transform_row(i, policy.P[i], policy.tau[i], g) for i in range(instance.n)])
    return DtmdpView(c_tilde=c, p_tilde=rows, gamma=g)


# -- chain structure ---------------------------------------------------------


def recurrent_classes(P: np.ndarray, tol: float = EDGE_TOL) -> List[np.ndarray]:
    """Closed communicating classes of the support graph of ``P``."""
    adj = np.asarray(P) > tol
    _, comp = connected_components(adj, directed=True, connection="strong")
    out = []
    for c in np.unique(comp):
        members = np.flatnonzero(comp == c)
        leaves = adj[members][:, comp != c].any()
        if not leaves:
            out.append(members)
    out.sort(key=lambda m: m[0])
    return out


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary distribution of an irreducible stochastic matrix."""
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    mu = np.linalg.solve(A, b)
    mu = np.clip(mu, 0.0, None)
    return mu / mu.sum()


def absorption_probabilities(P: np.ndarray, classes: List[np.ndarray]) -> np.ndarray:
    """Probability of eventually entering each recurrent class, per start state."""
    n = P.shape[0]
    B = np.zeros((n, len(classes)))
    recurrent = np.zeros(n, dtype=bool)
    for k, members in enumerate(classes):
        B[members, k] = 1.0
        recurrent[members] = True
    T = np.flatnonzero(~recurrent)
    if T.size:
        Q = P[np.ix_(T, T)]
        R = np.stack([P[np.ix_(T, m)].sum(axis=1) for m in classes], axis=1)
        B[T] = np.linalg.solve(np.eye(T.size) - Q, R)
    return B


def cesaro_limit(P: np.ndarray) -> np.ndarray:
    """Limiting average of the powers of ``P``."""
    n = P.shape[0]
    classes = recurrent_classes(P)
    B = absorption_probabilities(P, classes)
    out = np.zeros((n, n))
    for k, members in enumerate(classes):
        mu = stationary_distribution(P[np.ix_(members, members)])
        out[:, members] += np.outer(B[:, k], mu)
    return out


def evaluate_policy(instance: GameInstance, policy: DefenderPolicy) -> PolicyEvaluation:
    """Long-run cost per unit time of ``policy`` from every initial state."""
    c = policy_stage_costs(instance, policy)
    P = np.asarray(policy.P)
    classes = recurrent_classes(P)
    B = absorption_probabilities(P, classes)
    class_vals = np.empty(len(classes))
    for k, members in enumerate(classes):
        mu = stationary_distribution(P[np.ix_(members, members)])
        class_vals[k] = float(mu @ c[members]) / float(mu @ policy.tau[members])
    z = B @ class_vals
    return PolicyEvaluation(
        avg_cost=z,
        recurrent_classes=tuple(tuple(int(x) for x in m) for m in classes),
        is_unichain=len(classes) == 1,
        stage_costs=c,
    )
