"""Independent reference computations used by the tests.

Nothing here calls the package's attacker, smdp, bilevel or solver code:
overlaps come from numerical quadrature or closed forms written out
again, best responses from plain enumeration, optima from grids and from
a linear program solved by scipy's HiGHS.
"""

from __future__ import annotations

import math
from itertools import combinations, product

import numpy as np
from scipy import integrate, linalg
from scipy.optimize import linprog

TIE = 1e-9


def overlap(tau, model):
    """E[(tau - xi)^+] by direct integration of the distribution."""
    kind = model.kind
    if kind == "infinite":
        return 0.0
    if kind == "deterministic":
        return tau - model.value if tau > model.value else 0.0
    if kind == "empirical":
        return sum(max(tau - s, 0.0) for s in model.samples) / len(model.samples)
    lam = model.value
    val, _ = integrate.quad(lambda x: (tau - x) * lam * math.exp(-lam * x), 0.0, tau, epsabs=1e-13, epsrel=1e-12)
    return val


def simplex_points(n, steps):
    """Every distribution over n outcomes with entries in multiples of 1/steps."""
    pts = []
    for bars in combinations(range(steps + n - 1), n - 1):
        prev, parts = -1, []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(steps + n - 1 - prev - 1)
        pts.append([x / steps for x in parts])
    return np.array(pts)


class Tables:
    """w, reward and loss tables of an instance, rebuilt from raw fields."""

    def __init__(self, inst):
        self.inst = inst
        self._w = {}

    def w(self, tau):
        key = round(float(tau), 12)
        if key not in self._w:
            self._w[key] = np.array([[overlap(tau, m) for m in row] for row in self.inst.attack_time])
        return self._w[key]

    def attack_loss(self, p, tau):
        """Prior-weighted loss with brute-force, defender-favoring best responses."""
        inst = self.inst
        w = self.w(tau)
        aidx = {a: k for k, a in enumerate(inst.attacks)}
        total = 0.0
        for l, t in enumerate(inst.types):
            rewards, losses = [], []
            for a in t.attacks:
                g = aidx[a]
                rewards.append(sum(p[j] * w[g, j] * inst.reward[l, g, j] for j in range(inst.n)))
                losses.append(sum(p[j] * w[g, j] * inst.loss[l, g, j] for j in range(inst.n)))
            top = max(rewards)
            tied = [k for k, r in enumerate(rewards) if r >= top - TIE]
            low = min(losses[k] for k in tied)
            chosen = min((k for k in tied if losses[k] <= low + TIE), key=lambda k: t.attacks[k])
            total += t.prior * losses[chosen]
        return total

    def stage_cost(self, i, p, tau):
        return self.attack_loss(p, tau) + self.inst.alpha * float(np.dot(p, self.inst.migration[i]))


def grid_subproblem(inst, i, tau, kappa, V, gamma, steps=50):
    """Minimum over a simplex grid of the improvement objective (constants dropped)."""
    tab = Tables(inst)
    theta = inst.alpha * inst.migration[i] + gamma * kappa * np.asarray(V)
    best = math.inf
    for p in simplex_points(inst.n, steps):
        val = tab.attack_loss(p, tau) + float(p @ theta)
        best = min(best, val)
    return best


def smdp_lp_optimum(inst, steps=20):
    """Optimal average cost over stationary randomized policies whose actions
    are simplex-grid rows and grid periods, by the standard occupation-measure LP."""
    tab = Tables(inst)
    pts = simplex_points(inst.n, steps)
    taus = list(inst.tau_grid())
    n = inst.n
    costs, times, rows, owner = [], [], [], []
    loss_cache = {}
    for tau in taus:
        loss_cache[tau] = np.array([tab.attack_loss(p, tau) for p in pts])
    for i in range(n):
        mig = inst.alpha * pts @ inst.migration[i]
        for tau in taus:
            costs.append(loss_cache[tau] + mig)
            times.append(np.full(len(pts), tau))
            rows.append(pts)
            owner.append(np.full(len(pts), i))
    c = np.concatenate(costs)
    t = np.concatenate(times)
    P = np.vstack(rows)
    own = np.concatenate(owner)
    A = np.zeros((n + 1, c.shape[0]))
    for j in range(n):
        A[j] = (own == j).astype(float) - P[:, j]
    A[n] = t
    b = np.zeros(n + 1)
    b[n] = 1.0
    res = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def deterministic_policy_optimum(inst, steps):
    """True brute force: every deterministic choice of (row, period) per state,
    evaluated through the transformed chain's stationary distribution."""
    tab = Tables(inst)
    pts = simplex_points(inst.n, steps)
    taus = list(inst.tau_grid())
    actions = [(p, tau) for p in pts for tau in taus]
    best = math.inf
    for choice in product(range(len(actions)), repeat=inst.n):
        P = np.array([actions[k][0] for k in choice])
        tau = np.array([actions[k][1] for k in choice])
        c = np.array([tab.stage_cost(i, P[i], tau[i]) for i in range(inst.n)])
        z = chain_average(P, c, tau)
        best = min(best, float(np.max(z)))
    return best


def chain_average(P, c, tau):
    """Long-run cost per unit time from each start, via eigen-decomposition of
    the transformed chain (valid for any stationary policy)."""
    n = P.shape[0]
    gamma = 0.5 * tau.min()
    Pt = gamma * (P - np.eye(n)) / tau[:, None] + np.eye(n)
    ct = c / tau
    return cesaro_eig(Pt) @ ct


def cesaro_eig(P):
    """Cesaro limit of a stochastic matrix as the spectral projector for eigenvalue 1."""
    vals, left, right = linalg.eig(P, left=True, right=True)
    ones = np.abs(vals - 1.0) < 1e-9
    L = left[:, ones]
    R = right[:, ones]
    return np.real(R @ np.linalg.solve(L.conj().T @ R, L.conj().T))
