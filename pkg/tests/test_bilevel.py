import importlib.util

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stmtd import bilevel
from stmtd.bilevel import (
    build_subproblem,
    build_vertex_table,
    export_miqp,
    miqp_filename,
    profiles,
    solve_state,
    solve_state_vertices,
)
from stmtd.generators import random_instance
from stmtd.smdp import stage_cost

from oracles import Tables, grid_subproblem

HAS_SCIP = importlib.util.find_spec("pyscipopt") is not None


def random_sub(rng, n=None):
    inst = random_instance(rng, n=n or int(rng.integers(1, 4)), n_types=int(rng.integers(1, 3)), max_attacks=3)
    i = int(rng.integers(inst.n))
    tau = float(rng.choice(inst.tau_grid()))
    kappa = float(rng.uniform(0.5, 1.0))
    V = rng.normal(scale=5.0, size=inst.n)
    return inst, build_subproblem(inst, i, tau, kappa, V)


def test_subproblem_fields(small_instance):
    V = np.array([1.0, -2.0, 0.5])
    sub = build_subproblem(small_instance, 1, 1.5, 0.75, V)
    np.testing.assert_allclose(sub.theta, small_instance.alpha * small_instance.migration[1] + 0.25 * 0.75 * V)
    assert sub.constant == pytest.approx(0.75 * (1 - 0.25 / 1.5) * -2.0)
    with pytest.raises(ValueError):
        build_subproblem(small_instance, 1, 1.5, 0.75, [np.nan, 0, 0])


def test_solution_value_is_consistent(rng):
    """The returned value is the improvement objective evaluated at the returned p."""
    for _ in range(30):
        inst = random_instance(rng, n=int(rng.integers(1, 4)))
        i, tau, kappa = int(rng.integers(inst.n)), float(rng.choice(inst.tau_grid())), 0.9
        V = rng.normal(scale=5.0, size=inst.n)
        sub = build_subproblem(inst, i, tau, kappa, V)
        sol = solve_state(sub)
        p = sol.p
        direct = stage_cost(inst, i, p, tau) + sub.gamma * kappa * float(p @ V)
        assert sol.objective == pytest.approx(direct, abs=1e-8)
        full = direct / tau + kappa * (1 - sub.gamma / tau) * V[i]
        assert sol.value == pytest.approx(full, abs=1e-8)
        assert np.all(p >= -1e-12) and p.sum() == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_exact_solution_beats_grid(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n=int(rng.integers(1, 4)), n_types=int(rng.integers(1, 3)))
    i, tau = 0, float(rng.choice(inst.tau_grid()))
    V = rng.normal(scale=3.0, size=inst.n)
    sol = solve_state(build_subproblem(inst, i, tau, 0.8, V))
    ref = grid_subproblem(inst, i, tau, 0.8, V, inst.tau_lo / 2, steps=12)
    assert sol.objective <= ref + 1e-9
    # the optimum is achieved at a point whose real best response gives that value
    tab = Tables(inst)
    theta = inst.alpha * inst.migration[i] + inst.tau_lo / 2 * 0.8 * V
    assert tab.attack_loss(sol.p, tau) + sol.p @ theta == pytest.approx(sol.objective, abs=1e-7)


def test_vertex_route_equals_lp_route(rng):
    for _ in range(40):
        inst, sub = random_sub(rng)
        table = build_vertex_table(inst, sub.tau)
        a, b = solve_state(sub), solve_state_vertices(sub, table)
        assert a.objective == pytest.approx(b.objective, abs=1e-9)
        assert a.value == pytest.approx(b.value, abs=1e-9)


def test_pruning_keeps_optimum(rng):
    for _ in range(30):
        inst, sub = random_sub(rng)
        full = solve_state(sub, prune=False)
        pruned = solve_state(sub, prune=True)
        assert pruned.objective == pytest.approx(full.objective, abs=1e-9)
        assert pruned.profiles_solved <= full.profiles_solved


def test_profiles_enumerates_product():
    u = [np.eye(2), np.ones((3, 2))]
    c = [np.zeros((2, 2)), np.zeros((3, 2))]
    assert len(list(profiles(u, c, prune=False))) == 6


def test_vertex_table_cache(small_instance):
    a = bilevel.vertex_tables(small_instance)
    b = bilevel.vertex_tables(small_instance.with_alpha(small_instance.alpha + 1))
    assert a is b
    assert len(a) == len(small_instance.tau_grid())


def test_miqp_text(small_instance):
    sub = build_subproblem(small_instance, 2, 1.0, 0.5, np.zeros(3))
    text = export_miqp(sub)
    for token in ("Minimize", "Subject To", "simplex:", "pick0:", "Binaries", "End", "v0 free"):
        assert token in text
    assert miqp_filename(sub) == "sub_i2_tau1.lp"
    with pytest.raises(ValueError):
        export_miqp(sub, B=sub.big_m_floor / 2)


@pytest.mark.skipif(not HAS_SCIP, reason="pyscipopt not installed")
def test_miqp_matches_solve_state(tmp_path, rng):
    from pyscipopt import Model

    for k in range(10):
        inst, sub = random_sub(rng)
        path = tmp_path / f"m{k}.lp"
        path.write_text(export_miqp(sub))
        m = Model()
        m.hideOutput()
        m.readProblem(str(path))
        m.optimize()
        assert m.getStatus() == "optimal"
        assert m.getObjVal() == pytest.approx(solve_state(sub).objective, abs=1e-6)


# -- documented examples and invariants --------------------------------------

from stmtd.attacker import best_response_set
from stmtd.model import AttackTimeModel, GameInstance


def two_state(C, R, M, times=None, attacks=("a",), alpha=1.0):
    d0 = AttackTimeModel.deterministic(0.0)
    times = times or [[d0, d0] for _ in attacks]
    return GameInstance.from_attack_tables(["x", "y"], [("t", 1.0, list(attacks))], list(attacks), R, C, times, M, alpha=alpha)


def test_theta_without_value_coupling(small_instance):
    V = np.array([3.0, -1.0, 2.0])
    expect = small_instance.alpha * small_instance.migration[0]
    np.testing.assert_allclose(build_subproblem(small_instance, 0, 1.0, 0.0, V).theta, expect)
    np.testing.assert_allclose(build_subproblem(small_instance, 0, 1.0, 0.9, np.zeros(3)).theta, expect)


def test_migration_only_problem():
    inf = AttackTimeModel.infinite()
    inst = two_state([[5.0, 5.0]], [[5.0, 5.0]], [[4.0, 1.5], [1.0, 1.0]], times=[[inf, inf]])
    sub = build_subproblem(inst, 0, 1.0, 0.0, np.zeros(2))
    assert np.all(sub.w == 0)
    sol = solve_state(sub)
    np.testing.assert_array_equal(sol.p, [0.0, 1.0])
    assert sol.objective == 1.5


def test_hand_example_value_three():
    # w C = (10, 0), w R = (1, 0), theta = (1, 3)
    inst = two_state([[10.0, 0.0]], [[1.0, 0.0]], [[1.0, 3.0], [1.0, 1.0]])
    sol = solve_state(build_subproblem(inst, 0, 1.0, 0.0, np.zeros(2)))
    np.testing.assert_allclose(sol.p, [0.0, 1.0], atol=1e-12)
    assert sol.value == pytest.approx(3.0)
    ref = grid_subproblem(inst, 0, 1.0, 0.0, np.zeros(2), 0.5, steps=100)
    assert ref == pytest.approx(3.0)


def test_constant_objective_returns_vertex():
    inst = two_state([[0.0, 0.0]], [[1.0, 2.0]], [[2.0, 2.0], [1.0, 1.0]])
    sol = solve_state(build_subproblem(inst, 0, 1.0, 0.0, np.zeros(2)))
    assert sorted(sol.p.tolist()) == [0.0, 1.0]
    assert sol.value == pytest.approx(2.0)


def test_miqp_binary_count():
    inst = two_state([[1.0, 1.0], [2.0, 2.0]], [[1.0, 2.0], [2.0, 1.0]], [[1.0, 2.0], [2.0, 1.0]], attacks=("a", "b"))
    text = export_miqp(build_subproblem(inst, 0, 1.0, 0.5, np.zeros(2)))
    binaries = text.split("Binaries\n")[1].split("End")[0].split()
    assert binaries == ["n0_0", "n0_1"]
    assert text.count(" = 1") == 2  # one simplex row, one selector row


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_profile_is_a_best_response_at_the_solution(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n=int(rng.integers(1, 4)), n_types=int(rng.integers(1, 3)))
    tau = float(rng.choice(inst.tau_grid()))
    sub = build_subproblem(inst, 0, tau, 0.7, rng.normal(size=inst.n))
    sol = solve_state(sub)
    for l, a in enumerate(sol.profile):
        ties, _ = best_response_set(inst, 0, np.clip(sol.p, 0, None) / np.clip(sol.p, 0, None).sum(), tau, l)
        assert a in ties


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), j=st.integers(0, 2), drop=st.floats(0.0, 5.0))
def test_value_monotone_in_theta(seed, j, drop):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n=3)
    V = rng.normal(size=3)
    sub = build_subproblem(inst, 1, 1.0, 0.8, V)
    V2 = V.copy()
    V2[j] -= drop / (sub.gamma * 0.8)  # lowers theta_j by `drop`
    lower = build_subproblem(inst, 1, 1.0, 0.8, V2)
    assert solve_state(lower).objective <= solve_state(sub).objective + 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_single_attack_per_type_is_linear(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n=int(rng.integers(1, 5)), n_types=int(rng.integers(1, 4)), max_attacks=1)
    sub = build_subproblem(inst, 0, 1.0, 0.6, rng.normal(size=inst.n))
    coef = sum(c[0] for c in sub.weighted_loss) + sub.theta
    sol = solve_state(sub)
    assert sol.objective == pytest.approx(coef.min(), abs=1e-10)
    assert np.count_nonzero(sol.p > 1e-12) == 1
