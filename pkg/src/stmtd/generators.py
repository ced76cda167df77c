"""Random game instances and policies for tests, oracles and benchmarks."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .model import AttackerType, AttackerTypeSet, AttackTimeModel, ConfigurationSpace, DefenderPolicy, GameInstance


def random_instance(
    rng: np.random.Generator,
    n: int = 3,
    n_types: int = 2,
    max_attacks: int = 3,
    tau_lo: float = 0.5,
    tau_hi: float = 2.0,
    tau_step: float = 0.5,
    alpha: Optional[float] = None,
    infinite_share: float = 0.25,
    kinds=("exponential", "deterministic"),
) -> GameInstance:
    """A valid instance with independent per-type attack spaces.

    Each type owns 1..max_attacks attacks; every attack reaches at least
    one state (others are set to infinite attack time with probability
    ``infinite_share``).
    """
    attacks, spaces = [], []
    for l in range(n_types):
        k = int(rng.integers(1, max_attacks + 1))
        ids = tuple(f"a{l}_{q}" for q in range(k))
        attacks.extend(ids)
        spaces.append(ids)
    na = len(attacks)
    reward = rng.uniform(0.5, 10.0, size=(n_types, na, n))
    loss = rng.uniform(0.5, 10.0, size=(n_types, na, n))
    at = []
    for a in range(na):
        hit = rng.random(n) >= infinite_share
        if not hit.any():
            hit[rng.integers(n)] = True
        row = []
        for j in range(n):
            if not hit[j]:
                row.append(AttackTimeModel.infinite())
                continue
            kind = kinds[int(rng.integers(len(kinds)))]
            if kind == "exponential":
                row.append(AttackTimeModel.exponential(float(rng.uniform(0.5, 5.0))))
            else:
                row.append(AttackTimeModel.deterministic(float(rng.uniform(0.0, tau_hi))))
        at.append(tuple(row))
    M = rng.uniform(0.0, 10.0, size=(n, n))
    np.fill_diagonal(M, rng.uniform(0.5, 5.0, size=n))
    priors = rng.dirichlet(np.ones(n_types))
    priors[-1] = 1.0 - priors[:-1].sum()
    return GameInstance(
        space=ConfigurationSpace(tuple(f"s{i}" for i in range(n))),
        attackers=AttackerTypeSet(tuple(AttackerType(f"t{l}", float(priors[l]), spaces[l]) for l in range(n_types))),
        attacks=tuple(attacks),
        reward=reward,
        loss=loss,
        attack_time=tuple(at),
        migration=M,
        tau_lo=tau_lo,
        tau_hi=tau_hi,
        tau_step=tau_step,
        alpha=float(rng.uniform(0.0, 2.0)) if alpha is None else alpha,
    )


def random_policy(rng: np.random.Generator, instance: GameInstance, unichain: bool = True) -> DefenderPolicy:
    """Random stationary policy on the instance's tau grid; strictly positive rows when unichain."""
    n = instance.n
    P = rng.dirichlet(np.ones(n), size=n)
    if not unichain:
        P = P * (rng.random((n, n)) < 0.5)
        P[np.arange(n), np.arange(n)] += 1e-3
        P /= P.sum(axis=1, keepdims=True)
    tau = rng.choice(instance.tau_grid(), size=n)
    return DefenderPolicy(P, tau)
