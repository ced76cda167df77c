"""Attacker best responses under the strong Stackelberg convention.

The attacker sees the previous state ``i`` and the defender's committed
action ``(p_i, tau_i)`` and picks, per type, the attack maximizing the
expected reward of the coming period. Exact ties (absolute tolerance
``TIE_TOL``) are broken in the defender's favor, then by attack order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .model import GameInstance, Index

TIE_TOL = 1e-9


@dataclass(frozen=True)
class BestResponse:
    attacks: Tuple[str, ...]
    values: Tuple[float, ...]
    tie_sets: Tuple[Tuple[str, ...], ...]
    # positions inside each type's attack space
    positions: Tuple[int, ...]


def _row(instance: GameInstance, p_i) -> np.ndarray:
    p = np.asarray(p_i, dtype=float)
    if p.shape != (instance.n,):
        raise ValueError(f"probability row must have length {instance.n}")
    if np.any(p < -1e-9) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("p_i must be a probability row")
    return p


def attack_rewards(instance: GameInstance, p_i, tau_i: float, l: int) -> np.ndarray:
    """Expected reward of every attack in type ``l``'s space (declared order)."""
    u, _ = instance.type_tables(tau_i)[l]
    return u @ np.asarray(p_i, dtype=float)


def attack_losses(instance: GameInstance, p_i, tau_i: float, l: int) -> np.ndarray:
    """Defender's expected loss (unweighted by the prior) for every attack of type ``l``."""
    _, c = instance.type_tables(tau_i)[l]
    return c @ np.asarray(p_i, dtype=float)


def expected_attack_reward(instance: GameInstance, i: Index, p_i, tau_i: float, l: Index, a: Index) -> float:
    instance.state_index(i)
    p = _row(instance, p_i)
    li = instance.type_index(l)
    pos = instance.attack_position(li, a)
    return float(attack_rewards(instance, p, tau_i, li)[pos])


def _tie_positions(values: np.ndarray) -> np.ndarray:
    return np.flatnonzero(values >= values.max() - TIE_TOL)


def _defender_choice(positions, losses, ids) -> int:
    # lowest defender loss, then lowest attack id among equal losses
    losses = np.asarray(losses, dtype=float)
    low = losses.min()
    cands = [k for k, x in zip(positions, losses) if x <= low + TIE_TOL]
    return min(cands, key=lambda k: ids[k])


def best_response_set(instance: GameInstance, i: Index, p_i, tau_i: float, l: Index) -> Tuple[Tuple[str, ...], float]:
    """All attacks of type ``l`` attaining the maximal expected reward, and that maximum."""
    instance.state_index(i)
    p = _row(instance, p_i)
    li = instance.type_index(l)
    vals = attack_rewards(instance, p, tau_i, li)
    ties = _tie_positions(vals)
    ids = instance.types[li].attacks
    return tuple(ids[k] for k in ties), float(vals.max())


def break_ties_for_defender(
    instance: GameInstance, i: Index, p_i, tau_i: float, tie_sets: Sequence[Sequence[str]]
) -> BestResponse:
    instance.state_index(i)
    p = _row(instance, p_i)
    chosen, values, positions = [], [], []
    for li, ties in enumerate(tie_sets):
        if not ties:
            raise ValueError(f"tie set of type {li} is empty")
        pos = [instance.attack_position(li, a) for a in ties]
        losses = attack_losses(instance, p, tau_i, li)
        rewards = attack_rewards(instance, p, tau_i, li)
        best = _defender_choice(pos, losses[pos], instance.types[li].attacks)
        chosen.append(instance.types[li].attacks[best])
        values.append(float(rewards[best]))
        positions.append(best)
    return BestResponse(
        attacks=tuple(chosen),
        values=tuple(values),
        tie_sets=tuple(tuple(t) for t in tie_sets),
        positions=tuple(positions),
    )


def best_response(instance: GameInstance, i: Index, p_i, tau_i: float) -> BestResponse:
    """Per-type best responses with the defender-favoring tie rule applied."""
    sets = [best_response_set(instance, i, p_i, tau_i, l)[0] for l in range(len(instance.types))]
    return break_ties_for_defender(instance, i, p_i, tau_i, sets)


def best_response_positions(instance: GameInstance, p: np.ndarray, tau: float) -> np.ndarray:
    """Fast path used inside solvers: chosen position per type, no validation."""
    out = np.empty(len(instance.types), dtype=np.intp)
    ids_all = [t.attacks for t in instance.types]
    for li, (u, c) in enumerate(instance.type_tables(tau)):
        vals = u @ p
        ties = _tie_positions(vals)
        if ties.size == 1:
            out[li] = ties[0]
        else:
            out[li] = _defender_choice(ties.tolist(), c[ties] @ p, ids_all[li])
    return out


def attack_loss_given_response(instance: GameInstance, p: np.ndarray, tau: float, positions) -> float:
    """Prior-weighted defender attack loss for a fixed response profile."""
    total = 0.0
    for li, (prior, (_, c)) in enumerate(zip(instance.priors, instance.type_tables(tau))):
        total += prior * float(c[positions[li]] @ p)
    return total
