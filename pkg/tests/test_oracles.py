"""The reference computations agree with each other before anything is tested against them."""

import numpy as np
import pytest

from stmtd.generators import random_instance

from oracles import cesaro_eig, deterministic_policy_optimum, simplex_points, smdp_lp_optimum


@pytest.mark.parametrize("seed", range(3))
def test_lp_optimum_equals_brute_force(seed):
    rng = np.random.default_rng(400 + seed)
    inst = random_instance(rng, n=2, n_types=1, max_attacks=2, tau_lo=0.5, tau_hi=1.0, tau_step=0.5)
    assert smdp_lp_optimum(inst, steps=6) == pytest.approx(deterministic_policy_optimum(inst, steps=6), abs=1e-8)


def test_cesaro_matches_power_average(rng):
    P = rng.dirichlet(np.ones(4), size=4)
    P[3] = [0, 0, 0, 1.0]
    acc, Q = np.zeros((4, 4)), np.eye(4)
    for _ in range(20000):
        acc += Q
        Q = Q @ P
    np.testing.assert_allclose(cesaro_eig(P), acc / 20000, atol=1e-3)


def test_simplex_points_count():
    # C(steps + n - 1, n - 1)
    assert len(simplex_points(3, 20)) == 231
    np.testing.assert_allclose(simplex_points(4, 5).sum(axis=1), 1.0)
