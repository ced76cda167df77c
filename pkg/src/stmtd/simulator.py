"""Monte-Carlo replay of the defender/attacker interaction.

Each period the attacker observes the previous state ``i``, best-responds
to ``(p_i, tau_i)`` exactly as in the analytic model, the defender moves
to ``j ~ p_i``, and the compromise time ``xi ~ Xi[a][j]`` is drawn. The
first period treats the initial state as the previously observed one.

Randomness comes from Philox streams keyed by ``(seed, episode)``, so
episodes are independent and results do not depend on execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import _kernels
from .attacker import best_response_positions
from .model import AttackTimeModel, DefenderPolicy, GameInstance, require_valid

TYPE_MODES = ("sample-per-episode", "expectation-mix")
TRAJECTORY_HEADER = ("episode", "k", "i", "j", "type", "attack", "xi", "loss", "migration_cost")


@dataclass
class SimConfig:
    periods: int = 10_000
    episodes: int = 1
    seed: int = 0
    type_mode: str = "sample-per-episode"
    batches: int = 20
    trajectory: bool = False

    def __post_init__(self):
        if self.periods < 1 or self.episodes < 1:
            raise ValueError("periods and episodes must be at least 1")
        if self.type_mode not in TYPE_MODES:
            raise ValueError(f"type_mode must be one of {TYPE_MODES}")


@dataclass(eq=False)
class SimResult:
    empirical_avg_cost: float
    std_error: float
    compromise_fraction: float
    migration_count: np.ndarray
    attack_histogram: Dict[str, Dict[str, int]]
    # per initial state (episodes are stratified over s0); nan if unseen
    per_state_avg_cost: np.ndarray
    total_cost: float
    total_time: float
    trajectory: List[tuple] = field(default_factory=list)


def episode_rng(seed: int, episode: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(episode)])))


def sample_attack_time(model: AttackTimeModel, rng: np.random.Generator, size=None):
    """Draw compromise times; ``inf`` for attacks that never succeed."""
    kind = model.kind
    if kind == "deterministic":
        return float(model.value) if size is None else np.full(size, float(model.value))
    if kind == "exponential":
        u = rng.random(size)
        # inverse CDF; 1 - u lies in (0, 1]
        return -np.log1p(-u) / model.value
    if kind == "empirical":
        s = np.asarray(model.samples, dtype=float)
        return s[rng.integers(0, s.shape[0], size=size)]
    if kind == "infinite":
        return float("inf") if size is None else np.full(size, np.inf)
    raise ValueError(f"unknown attack-time kind {kind!r}")


def _sample_xi(instance: GameInstance, attack: np.ndarray, dest: np.ndarray, rng) -> np.ndarray:
    """Compromise times for per-period global attack ids and destinations."""
    xi = np.empty(attack.shape[0])
    key = attack * instance.n + dest
    for k in np.unique(key):
        sel = key == k
        a, j = divmod(int(k), instance.n)
        xi[sel] = sample_attack_time(instance.attack_time[a][j], rng, int(sel.sum()))
    return xi


def simulate(instance: GameInstance, policy: DefenderPolicy, cfg: Optional[SimConfig] = None) -> SimResult:
    cfg = cfg or SimConfig()
    require_valid(instance)
    issues = policy.problems(instance)
    if issues:
        raise ValueError("; ".join(issues))
    n = instance.n
    P = np.asarray(policy.P, dtype=float)
    tau = np.asarray(policy.tau, dtype=float)
    cumP = np.cumsum(P, axis=1)
    cumP[:, -1] = 1.0
    types = instance.types
    priors = instance.priors
    L = len(types)
    # best response of each type to each state's action, as global attack ids
    resp = np.empty((L, n), dtype=np.intp)
    for i in range(n):
        pos = best_response_positions(instance, P[i], tau[i])
        for l in range(L):
            resp[l, i] = instance.type_attacks[l][pos[l]]
    loss_tab = np.asarray(instance.loss)
    M = np.asarray(instance.migration)
    alpha = instance.alpha
    mix = cfg.type_mode == "expectation-mix"

    migration_count = np.zeros((n, n), dtype=np.int64)
    hist = {t.id: {a: 0 for a in t.attacks} for t in types}
    cost_by_s0 = np.zeros(n)
    time_by_s0 = np.zeros(n)
    batch_cost, batch_time = [], []
    ep_cost, ep_time = [], []
    trajectory: List[tuple] = []
    compromised = 0.0
    total_cost = total_time = 0.0
    N = cfg.periods
    nb = max(1, min(cfg.batches, N))
    edges = np.linspace(0, N, nb + 1).astype(int)

    for e in range(cfg.episodes):
        rng = episode_rng(cfg.seed, e)
        s0 = e % n
        path = _kernels.walk_chain(cumP, rng.random(N), s0)
        src, dst = path[:-1], path[1:]
        period = tau[src]
        mig = alpha * M[src, dst]
        if mix:
            ls = range(L)
            weights = priors
        else:
            l = int(rng.choice(L, p=priors))
            ls = [l]
            weights = np.ones(1)
        attack_loss = np.zeros(N)
        comp = np.zeros(N)
        for w, l in zip(weights, ls):
            a = resp[l, src]
            xi = _sample_xi(instance, a, dst, rng)
            over = np.maximum(period - xi, 0.0)
            part = over * loss_tab[l, a, dst]
            attack_loss += w * part
            comp += w * over
            ids, counts = np.unique(a, return_counts=True)
            for g, c in zip(ids, counts):
                hist[types[l].id][instance.attacks[g]] += int(c)
            if cfg.trajectory:
                for k in range(N):
                    trajectory.append(
                        (e, k, int(src[k]), int(dst[k]), types[l].id, instance.attacks[a[k]], float(xi[k]), float(part[k]), float(mig[k]))
                    )
        cost = attack_loss + mig
        np.add.at(migration_count, (src, dst), 1)
        ec, et = float(cost.sum()), float(period.sum())
        cost_by_s0[s0] += ec
        time_by_s0[s0] += et
        total_cost += ec
        total_time += et
        compromised += float(comp.sum())
        ep_cost.append(ec)
        ep_time.append(et)
        for b in range(nb):
            sl = slice(edges[b], edges[b + 1])
            batch_cost.append(float(cost[sl].sum()))
            batch_time.append(float(period[sl].sum()))

    # one type per episode makes episodes the independent units; otherwise
    # batches within episodes are the units
    if not mix and cfg.episodes > 1:
        bc, bt = np.asarray(ep_cost), np.asarray(ep_time)
    else:
        bc, bt = np.asarray(batch_cost), np.asarray(batch_time)
    mean = total_cost / total_time
    if bc.shape[0] > 1:
        # ratio-estimator standard error from batch means
        resid = bc - mean * bt
        se = float(np.sqrt(np.sum(resid**2) / (bc.shape[0] * (bc.shape[0] - 1))) / bt.mean())
    else:
        se = float("nan")
    with np.errstate(invalid="ignore", divide="ignore"):
        per_state = np.where(time_by_s0 > 0, cost_by_s0 / time_by_s0, np.nan)
    return SimResult(
        empirical_avg_cost=mean,
        std_error=se,
        compromise_fraction=min(1.0, compromised / total_time),
        migration_count=migration_count,
        attack_histogram=hist,
        per_state_avg_cost=per_state,
        total_cost=total_cost,
        total_time=total_time,
        trajectory=trajectory,
    )
