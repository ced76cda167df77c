import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stmtd.generators import random_instance
from stmtd.model import (
    AttackTimeModel,
    DefenderPolicy,
    InvalidInstanceError,
    expected_overlap,
    require_valid,
    validate_instance,
)

from oracles import overlap

# E[(1 - xi)^+] for xi ~ Exp(1) is 1/e
OVERLAP_EXP1_TAU1 = 0.36787944117144233


def test_overlap_exponential_frozen():
    assert expected_overlap(1.0, AttackTimeModel.exponential(1.0)) == pytest.approx(OVERLAP_EXP1_TAU1, abs=1e-12)


@pytest.mark.parametrize(
    "model, tau, value",
    [
        (AttackTimeModel.deterministic(0.3), 1.0, 0.7),
        (AttackTimeModel.deterministic(2.0), 1.0, 0.0),
        (AttackTimeModel.deterministic(0.0), 0.4, 0.4),
        (AttackTimeModel.empirical([0.1, 0.5, 3.0]), 1.0, (0.9 + 0.5) / 3),
        (AttackTimeModel.infinite(), 5.0, 0.0),
    ],
)
def test_overlap_closed_cases(model, tau, value):
    assert expected_overlap(tau, model) == pytest.approx(value, abs=1e-12)


def test_overlap_tiny_rate_stays_accurate():
    # tau - (1 - e^{-x})/lam ~ lam tau^2 / 2 for small lam
    lam, tau = 1e-9, 1.0
    assert expected_overlap(tau, AttackTimeModel.exponential(lam)) == pytest.approx(lam * tau**2 / 2, rel=1e-6)


def test_overlap_rejects_nonpositive_tau():
    with pytest.raises(ValueError):
        expected_overlap(0.0, AttackTimeModel.exponential(1.0))


@settings(max_examples=150, deadline=None)
@given(lam=st.floats(0.05, 20.0), tau=st.floats(0.01, 10.0))
def test_overlap_exponential_matches_quadrature(lam, tau):
    m = AttackTimeModel.exponential(lam)
    assert expected_overlap(tau, m) == pytest.approx(overlap(tau, m), rel=1e-9, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(
    lam=st.floats(0.05, 20.0),
    t1=st.floats(0.01, 5.0),
    dt=st.floats(0.0, 5.0),
)
def test_overlap_monotone_and_bounded(lam, t1, dt):
    m = AttackTimeModel.exponential(lam)
    a, b = expected_overlap(t1, m), expected_overlap(t1 + dt, m)
    assert 0.0 <= a <= t1
    assert a <= b + 1e-12
    # at most one unit of overlap per unit of extra time
    assert b - a <= dt + 1e-12


def test_attack_time_model_problems():
    assert AttackTimeModel.exponential(-1.0).problems()
    assert AttackTimeModel.deterministic(-0.1).problems()
    assert AttackTimeModel.empirical([]).problems()
    assert not AttackTimeModel.exponential(2.0).problems()
    assert AttackTimeModel.exponential(4.0).mean() == pytest.approx(0.25)
    assert math.isinf(AttackTimeModel.infinite().mean())


def test_attack_time_roundtrip():
    for m in (
        AttackTimeModel.exponential(1.5),
        AttackTimeModel.deterministic(0.2),
        AttackTimeModel.empirical([0.1, 0.2]),
        AttackTimeModel.infinite(),
    ):
        assert AttackTimeModel.from_dict(m.to_dict()) == m


def test_random_instances_validate(rng):
    for _ in range(20):
        inst = random_instance(rng, n=int(rng.integers(1, 5)))
        assert validate_instance(inst).ok


def test_validation_catches_each_violation(small_instance):
    inst = small_instance
    M = np.array(inst.migration)
    M[0, 0] = 0.0
    M[1, 2] = -1.0
    bad = inst.replace(migration=M, tau_lo=0.0, gamma=5.0)
    report = validate_instance(bad)
    text = " | ".join(report.violations)
    assert "diagonal migration cost" in text
    assert "m[1][2]" in text
    assert "tau_lo must be positive" in text
    assert "gamma" in text
    assert not report
    with pytest.raises(InvalidInstanceError):
        require_valid(bad)


def test_validation_priors_and_attacks(small_instance):
    from stmtd.model import AttackerType, AttackerTypeSet

    types = tuple(AttackerType(t.id, 0.9, t.attacks) for t in small_instance.types)
    rep = validate_instance(small_instance.replace(attackers=AttackerTypeSet(types)))
    assert any("priors must sum to 1" in v for v in rep.violations)
    types = (AttackerType("x", 1.0, ("nope",)),)
    rep = validate_instance(small_instance.replace(attackers=AttackerTypeSet(types), reward=np.zeros((1, len(small_instance.attacks), 3)), loss=np.zeros((1, len(small_instance.attacks), 3))))
    assert any("unknown attack" in v for v in rep.violations)


def test_tau_grid(small_instance):
    np.testing.assert_allclose(small_instance.tau_grid(), [0.5, 1.0, 1.5, 2.0])
    g = small_instance.with_tau_grid(0.1, 2.6, 0.1).tau_grid()
    assert len(g) == 26
    assert g[0] == 0.1 and g[-1] == 2.6
    assert small_instance.with_tau_grid(1.0, 1.0, 1.0).tau_grid().tolist() == [1.0]


def test_instance_arrays_are_read_only(small_instance):
    with pytest.raises(ValueError):
        small_instance.migration[0, 0] = 3.0
    with pytest.raises(ValueError):
        small_instance.overlap(1.0)[0, 0] = 3.0


def test_derived_instances(small_instance):
    inst = small_instance
    assert inst.with_alpha(0.7).alpha == 0.7
    assert inst.with_alpha(0.7).structure_key() == inst.structure_key()
    u = inst.with_updating_cost(9.0)
    assert np.all(np.diag(u.migration) == 9.0)
    assert u.structure_key() != inst.structure_key()
    z = inst.with_zero_attack_times()
    for row_old, row_new in zip(inst.attack_time, z.attack_time):
        for old, new in zip(row_old, row_new):
            assert new.is_infinite == old.is_infinite
            if not new.is_infinite:
                assert expected_overlap(0.7, new) == pytest.approx(0.7)


def test_policy_checks(small_instance):
    pol = DefenderPolicy(np.eye(3), np.array([0.5, 1.0, 2.0]))
    assert pol.problems(small_instance) == []
    assert pol.absorbing_states() == [0, 1, 2]
    bad = DefenderPolicy(np.full((3, 3), 0.5), np.array([0.1, 1.0, 3.0]))
    probs = bad.problems(small_instance)
    assert sum("sums to" in p for p in probs) == 3
    assert sum("outside" in p for p in probs) == 2
    with pytest.raises(ValueError):
        DefenderPolicy(np.eye(3), np.ones(2))
    again = DefenderPolicy.from_dict(pol.to_dict())
    np.testing.assert_array_equal(again.P, pol.P)


# -- documented examples and invariants --------------------------------------

BASE_M = [[2, 4, 8, 12], [4, 2, 11, 7], [8, 11, 2, 12], [12, 7, 12, 2]]


def test_bundled_instance_shape(synthetic):
    np.testing.assert_array_equal(synthetic.migration, BASE_M)
    assert validate_instance(synthetic).ok
    assert [t.prior for t in synthetic.types] == [0.15, 0.35, 0.5]
    assert synthetic.space.labels == (
        ("PHP", "MySQL"),
        ("Python", "MySQL"),
        ("PHP", "postgreSQL"),
        ("Python", "postgreSQL"),
    )


def test_violation_messages(synthetic):
    M = np.array(synthetic.migration)
    M[1, 1] = 0.0
    assert "diagonal migration cost must be positive (state 1)" in validate_instance(synthetic.replace(migration=M)).violations
    from stmtd.model import AttackerType, AttackerTypeSet

    two = AttackerTypeSet((AttackerType("x", 0.5, ("a",)), AttackerType("y", 0.6, ("a",))))
    inst = _tiny().replace(attackers=two, reward=np.zeros((2, 1, 1)), loss=np.zeros((2, 1, 1)))
    assert "type priors must sum to 1" in validate_instance(inst).violations


def _tiny():
    from stmtd.model import GameInstance

    return GameInstance.from_attack_tables(["s"], [("t", 1.0, ["a"])], ["a"], [[1.0]], [[1.0]], [[AttackTimeModel.infinite()]], [[1.0]])


def test_overlap_unit_examples():
    assert expected_overlap(1.0, AttackTimeModel.deterministic(0.0)) == 1.0
    assert expected_overlap(1.0, AttackTimeModel.infinite()) == 0.0
    assert expected_overlap(1.0, AttackTimeModel.exponential(1.0)) == pytest.approx(0.367879, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(d=st.floats(0.0, 3.0), k=st.integers(1, 6), tau=st.floats(0.01, 5.0))
def test_empirical_constant_equals_deterministic(d, k, tau):
    assert expected_overlap(tau, AttackTimeModel.empirical([d] * k)) == expected_overlap(tau, AttackTimeModel.deterministic(d))


@pytest.mark.parametrize(
    "model",
    [
        AttackTimeModel.deterministic(0.7),
        AttackTimeModel.empirical([0.2, 0.9, 1.4]),
        AttackTimeModel.infinite(),
        AttackTimeModel.exponential(0.8),
    ],
)
def test_overlap_monotone_on_grid(model):
    vals = [expected_overlap(t, model) for t in np.linspace(0.05, 4.0, 80)]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    assert all(0.0 <= v <= t + 1e-15 for v, t in zip(vals, np.linspace(0.05, 4.0, 80)))


@pytest.mark.parametrize("lam, tau", [(0.5, 1.0), (2.0, 0.5), (1.0, 2.0)])
def test_exponential_vs_empirical_draws(lam, tau):
    rng = np.random.default_rng(17)
    k = 20000
    draws = rng.exponential(1.0 / lam, size=k)
    x = np.maximum(tau - draws, 0.0)
    emp = expected_overlap(tau, AttackTimeModel.empirical(draws.tolist()))
    assert abs(expected_overlap(tau, AttackTimeModel.exponential(lam)) - emp) <= 3 * x.std(ddof=1) / np.sqrt(k)
