"""Domain types for the spatial-temporal moving target defense game.

All times share one abstract unit; rewards and losses are per that unit.
Instances are immutable once built: the numeric tables are stored as
read-only numpy arrays and derived lookups are cached lazily.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

PROB_TOL = 1e-9

Index = Union[int, str]


@dataclass(frozen=True)
class AttackTimeModel:
    """Distribution of the time an attack needs to compromise a state.

    ``value`` holds the delay for ``deterministic`` and the rate for
    ``exponential``; ``samples`` is used only by ``empirical``.
    """

    kind: str
    value: float = 0.0
    samples: Tuple[float, ...] = ()

    KINDS = ("deterministic", "exponential", "empirical", "infinite")

    @classmethod
    def deterministic(cls, d: float) -> "AttackTimeModel":
        return cls("deterministic", float(d))

    @classmethod
    def exponential(cls, rate: float) -> "AttackTimeModel":
        return cls("exponential", float(rate))

    @classmethod
    def empirical(cls, samples: Sequence[float]) -> "AttackTimeModel":
        return cls("empirical", 0.0, tuple(float(s) for s in samples))

    @classmethod
    def infinite(cls) -> "AttackTimeModel":
        return cls("infinite")

    @property
    def is_infinite(self) -> bool:
        return self.kind == "infinite"

    def problems(self) -> List[str]:
        if self.kind not in self.KINDS:
            return [f"unknown attack-time kind {self.kind!r}"]
        if self.kind == "deterministic" and not self.value >= 0:
            return ["deterministic attack time must be >= 0"]
        if self.kind == "exponential" and not self.value > 0:
            return ["exponential rate must be > 0"]
        if self.kind == "empirical":
            if not self.samples:
                return ["empirical attack time needs at least one sample"]
            if min(self.samples) < 0:
                return ["empirical attack-time samples must be >= 0"]
        return []

    def mean(self) -> float:
        if self.kind == "deterministic":
            return self.value
        if self.kind == "exponential":
            return 1.0 / self.value
        if self.kind == "empirical":
            return float(np.mean(self.samples))
        return math.inf

    def to_dict(self) -> dict:
        if self.kind == "deterministic":
            return {"kind": "deterministic", "d": self.value}
        if self.kind == "exponential":
            return {"kind": "exponential", "rate": self.value}
        if self.kind == "empirical":
            return {"kind": "empirical", "samples": list(self.samples)}
        return {"kind": "infinite"}

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttackTimeModel":
        kind = d["kind"]
        if kind == "deterministic":
            return cls.deterministic(d["d"])
        if kind == "exponential":
            return cls.exponential(d["rate"])
        if kind == "empirical":
            return cls.empirical(d["samples"])
        if kind == "infinite":
            return cls.infinite()
        raise ValueError(f"unknown attack-time kind {kind!r}")


INFINITE = AttackTimeModel.infinite()


def expected_overlap(tau: float, model: AttackTimeModel) -> float:
    """Expected compromised part of a period of length ``tau``: E[(tau - xi)^+]."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    kind = model.kind
    if kind == "infinite":
        return 0.0
    if kind == "deterministic":
        return max(0.0, tau - model.value)
    if kind == "exponential":
        lam = model.value
        # tau - (1 - e^{-lam tau}) / lam, written to stay accurate for small lam*tau
        x = lam * tau
        return tau + math.expm1(-x) / lam
    if kind == "empirical":
        x = np.maximum(tau - np.asarray(model.samples, dtype=float), 0.0)
        # mean shifted by the first term: exact when all samples coincide
        return float(x[0] + math.fsum(x - x[0]) / x.shape[0])
    raise ValueError(f"unknown attack-time kind {kind!r}")


@dataclass(frozen=True)
class ConfigurationSpace:
    states: Tuple[str, ...]
    labels: Optional[Tuple[Tuple[str, ...], ...]] = None
    aspects: Optional[Tuple[Tuple[str, Tuple[str, ...]], ...]] = None

    @property
    def n(self) -> int:
        return len(self.states)

    def problems(self) -> List[str]:
        out = []
        if self.n < 1:
            out.append("configuration space needs at least one state")
        if len(set(self.states)) != len(self.states):
            out.append("state identifiers must be unique")
        if self.labels is not None:
            if len(self.labels) != self.n:
                out.append("one label tuple per state is required")
            elif self.aspects is not None:
                for k, tup in enumerate(self.labels):
                    if len(tup) != len(self.aspects):
                        out.append(f"state {k}: expected {len(self.aspects)} labels, got {len(tup)}")
                        continue
                    for (name, allowed), lab in zip(self.aspects, tup):
                        if lab not in allowed:
                            out.append(f"state {k}: label {lab!r} not in aspect {name!r}")
        return out


@dataclass(frozen=True)
class AttackerType:
    id: str
    prior: float
    attacks: Tuple[str, ...]


@dataclass(frozen=True)
class AttackerTypeSet:
    types: Tuple[AttackerType, ...]

    def __len__(self) -> int:
        return len(self.types)

    def __iter__(self):
        return iter(self.types)

    @property
    def priors(self) -> np.ndarray:
        return np.array([t.prior for t in self.types], dtype=float)

    def problems(self) -> List[str]:
        out = []
        if not self.types:
            out.append("at least one attacker type is required")
            return out
        for k, t in enumerate(self.types):
            if t.prior < 0:
                out.append(f"type {k} ({t.id}): prior must be >= 0")
            if not t.attacks:
                out.append(f"type {k} ({t.id}): attack space must be nonempty")
        if abs(sum(t.prior for t in self.types) - 1.0) > PROB_TOL:
            out.append("type priors must sum to 1")
        if len({t.id for t in self.types}) != len(self.types):
            out.append("attacker type identifiers must be unique")
        return out


def _frozen_array(x, shape=None) -> np.ndarray:
    a = np.array(x, dtype=float)
    if shape is not None and a.shape != shape:
        raise ValueError(f"expected shape {shape}, got {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GameInstance:
    """A complete Markov Stackelberg game.

    ``reward`` and ``loss`` have shape (types, attacks, states) and are
    indexed by the global attack order in ``attacks``; entries for attacks
    outside a type's attack space are ignored. ``attack_time[a][j]`` is the
    compromise-time model for attack ``a`` against state ``j``.
    """

    space: ConfigurationSpace
    attackers: AttackerTypeSet
    attacks: Tuple[str, ...]
    reward: np.ndarray
    loss: np.ndarray
    attack_time: Tuple[Tuple[AttackTimeModel, ...], ...]
    migration: np.ndarray
    tau_lo: float
    tau_hi: float
    tau_step: float
    alpha: float = 1.0
    gamma: Optional[float] = None
    _cache: Dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        n, nt, na = self.space.n, len(self.attackers), len(self.attacks)
        object.__setattr__(self, "reward", _frozen_array(self.reward, (nt, na, n)))
        object.__setattr__(self, "loss", _frozen_array(self.loss, (nt, na, n)))
        object.__setattr__(self, "migration", _frozen_array(self.migration, (n, n)))
        at = tuple(tuple(row) for row in self.attack_time)
        if len(at) != na or any(len(row) != n for row in at):
            raise ValueError(f"attack_time must be {na} x {n}")
        object.__setattr__(self, "attack_time", at)
        object.__setattr__(self, "tau_lo", float(self.tau_lo))
        object.__setattr__(self, "tau_hi", float(self.tau_hi))
        object.__setattr__(self, "tau_step", float(self.tau_step))
        object.__setattr__(self, "alpha", float(self.alpha))
        if self.gamma is not None:
            object.__setattr__(self, "gamma", float(self.gamma))

    # -- sizes and lookups -------------------------------------------------

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def states(self) -> Tuple[str, ...]:
        return self.space.states

    @property
    def types(self) -> Tuple[AttackerType, ...]:
        return self.attackers.types

    @property
    def priors(self) -> np.ndarray:
        return self.attackers.priors

    def _lookup(self, key, build):
        try:
            return self._cache[key]
        except KeyError:
            val = self._cache[key] = build()
            return val

    @property
    def attack_index(self) -> Dict[str, int]:
        return self._lookup("attack_index", lambda: {a: k for k, a in enumerate(self.attacks)})

    @property
    def type_attacks(self) -> Tuple[np.ndarray, ...]:
        """Global attack indices of each type's attack space, in declared order."""

        def build():
            idx = self.attack_index
            out = []
            for t in self.types:
                arr = np.array([idx[a] for a in t.attacks if a in idx], dtype=np.intp)
                arr.setflags(write=False)
                out.append(arr)
            return tuple(out)

        return self._lookup("type_attacks", build)

    def state_index(self, i: Index) -> int:
        if isinstance(i, str):
            return self.states.index(i)
        i = int(i)
        if not 0 <= i < self.n:
            raise IndexError(f"state index {i} out of range")
        return i

    def type_index(self, l: Index) -> int:
        if isinstance(l, str):
            for k, t in enumerate(self.types):
                if t.id == l:
                    return k
            raise KeyError(f"unknown attacker type {l!r}")
        return int(l)

    def attack_position(self, l: int, a: Index) -> int:
        """Position of attack ``a`` inside type ``l``'s attack space."""
        if isinstance(a, str):
            if a not in self.attack_index:
                raise ValueError(f"unknown attack {a!r}")
            g = self.attack_index[a]
        else:
            g = int(a)
        hits = np.flatnonzero(self.type_attacks[l] == g)
        if hits.size == 0:
            raise ValueError(f"attack {a!r} is not in the attack space of type {self.types[l].id!r}")
        return int(hits[0])

    # -- tau grid and overlap tables --------------------------------------

    def tau_grid(self) -> np.ndarray:
        """Candidate periods tau_lo, tau_lo + step, ... not exceeding tau_hi."""

        def build():
            lo, hi, d = self.tau_lo, self.tau_hi, self.tau_step
            if not (d > 0 and hi >= lo):
                return np.array([lo])
            count = int(math.floor((hi - lo) / d + 1e-9)) + 1
            g = np.round(lo + d * np.arange(count), 12)
            g.setflags(write=False)
            return g

        return self._lookup("tau_grid", build)

    def overlap(self, tau: float) -> np.ndarray:
        """Table w[a, j] = E[(tau - xi_{a,j})^+] for every attack and state."""
        key = ("overlap", float(tau))

        def build():
            w = np.array([[expected_overlap(tau, m) for m in row] for row in self.attack_time], dtype=float)
            w = w.reshape(len(self.attacks), self.n)
            w.setflags(write=False)
            return w

        return self._lookup(key, build)

    def type_tables(self, tau: float) -> Tuple[Tuple[np.ndarray, np.ndarray], ...]:
        """Per type: (attacker reward-per-period, defender loss-per-period) over A_l x S."""
        key = ("type_tables", float(tau))

        def build():
            w = self.overlap(tau)
            out = []
            for l, idx in enumerate(self.type_attacks):
                u = w[idx] * self.reward[l, idx]
                c = w[idx] * self.loss[l, idx]
                u.setflags(write=False)
                c.setflags(write=False)
                out.append((u, c))
            return tuple(out)

        return self._lookup(key, build)

    # -- derived instances -------------------------------------------------

    def replace(self, **changes) -> "GameInstance":
        return dataclasses.replace(self, **changes)

    def with_alpha(self, alpha: float) -> "GameInstance":
        return self.replace(alpha=alpha)

    def with_tau_grid(self, lo: float, hi: float, step: float) -> "GameInstance":
        return self.replace(tau_lo=lo, tau_hi=hi, tau_step=step)

    def with_updating_cost(self, cost: float) -> "GameInstance":
        m = np.array(self.migration)
        np.fill_diagonal(m, cost)
        return self.replace(migration=m)

    def with_zero_attack_times(self) -> "GameInstance":
        """Every targeting attack compromises instantly; non-targeting stays infinite."""
        zero = AttackTimeModel.deterministic(0.0)
        at = tuple(tuple(INFINITE if m.is_infinite else zero for m in row) for row in self.attack_time)
        return self.replace(attack_time=at)

    def structure_key(self) -> tuple:
        """Hashable identity of everything except alpha and gamma."""

        def build():
            return (
                self.states,
                tuple((t.id, t.prior, t.attacks) for t in self.types),
                self.attacks,
                self.reward.tobytes(),
                self.loss.tobytes(),
                self.attack_time,
                self.migration.tobytes(),
                self.tau_lo,
                self.tau_hi,
                self.tau_step,
            )

        return self._lookup("structure_key", build)

    @classmethod
    def from_attack_tables(
        cls,
        states: Sequence[str],
        types: Sequence[Tuple[str, float, Sequence[str]]],
        attacks: Sequence[str],
        reward,
        loss,
        attack_time,
        migration,
        tau_lo: float = 1.0,
        tau_hi: float = 1.0,
        tau_step: float = 1.0,
        alpha: float = 1.0,
        gamma: Optional[float] = None,
        labels=None,
        aspects=None,
    ) -> "GameInstance":
        """Build from per-(attack, state) reward/loss tables shared by every type."""
        r = np.asarray(reward, dtype=float)
        c = np.asarray(loss, dtype=float)
        nt = len(types)
        return cls(
            space=ConfigurationSpace(tuple(states), labels, aspects),
            attackers=AttackerTypeSet(tuple(AttackerType(t, float(p), tuple(a)) for t, p, a in types)),
            attacks=tuple(attacks),
            reward=np.broadcast_to(r, (nt,) + r.shape),
            loss=np.broadcast_to(c, (nt,) + c.shape),
            attack_time=attack_time,
            migration=migration,
            tau_lo=tau_lo,
            tau_hi=tau_hi,
            tau_step=tau_step,
            alpha=alpha,
            gamma=gamma,
        )


@dataclass(frozen=True, eq=False)
class DefenderPolicy:
    """Stationary policy: row-stochastic P and one defending period per state."""

    P: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        P = _frozen_array(self.P)
        tau = _frozen_array(self.tau)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or tau.shape != (P.shape[0],):
            raise ValueError("policy needs an n x n matrix and a length-n tau vector")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "tau", tau)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def problems(self, instance: Optional[GameInstance] = None) -> List[str]:
        out = []
        if np.any(self.P < -PROB_TOL):
            out.append("policy rows must be nonnegative")
        for i, s in enumerate(self.P.sum(axis=1)):
            if abs(s - 1.0) > PROB_TOL:
                out.append(f"policy row {i} sums to {s}, not 1")
        if instance is not None:
            if self.n != instance.n:
                out.append(f"policy has {self.n} states, instance has {instance.n}")
            lo, hi = instance.tau_lo, instance.tau_hi
            for i, t in enumerate(self.tau):
                if not (lo - 1e-12 <= t <= hi + 1e-12):
                    out.append(f"tau[{i}] = {t} outside [{lo}, {hi}]")
        return out

    def absorbing_states(self, tol: float = 1e-9) -> List[int]:
        return [i for i in range(self.n) if self.P[i, i] >= 1.0 - tol]

    def to_dict(self) -> dict:
        return {"P": self.P.tolist(), "tau": self.tau.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "DefenderPolicy":
        return cls(np.asarray(d["P"], dtype=float), np.asarray(d["tau"], dtype=float))


@dataclass
class ValidationReport:
    violations: List[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


class InvalidInstanceError(ValueError):
    pass


def validate_instance(instance: GameInstance) -> ValidationReport:
    """Check every structural and numeric invariant of a game instance."""
    v = list(instance.space.problems())
    v += instance.attackers.problems()
    known = set(instance.attacks)
    for k, t in enumerate(instance.types):
        for a in t.attacks:
            if a not in known:
                v.append(f"type {k} ({t.id}): unknown attack {a!r}")
    if len(set(instance.attacks)) != len(instance.attacks):
        v.append("attack identifiers must be unique")

    M = instance.migration
    for i in range(instance.n):
        if not M[i, i] > 0:
            v.append(f"diagonal migration cost must be positive (state {i})")
    neg = np.argwhere(M < 0)
    for i, j in neg:
        v.append(f"migration cost m[{i}][{j}] must be >= 0")

    lo, hi, d = instance.tau_lo, instance.tau_hi, instance.tau_step
    if not lo > 0:
        v.append("tau_lo must be positive")
    if not hi >= lo:
        v.append("tau_hi must be >= tau_lo")
    if not d > 0:
        v.append("tau_step must be positive")
    elif hi >= lo and instance.tau_grid()[-1] < hi - d - 1e-9:
        v.append("tau grid does not reach tau_hi within one step")

    if np.any(instance.reward < 0):
        v.append("reward entries must be >= 0")
    if np.any(instance.loss < 0):
        v.append("loss entries must be >= 0")
    for a, row in enumerate(instance.attack_time):
        for j, m in enumerate(row):
            for p in m.problems():
                v.append(f"attack_time[{a}][{j}]: {p}")

    if instance.gamma is not None and not (0 < instance.gamma < lo):
        v.append("gamma must satisfy 0 < gamma < tau_lo")
    return ValidationReport(v)


def require_valid(instance: GameInstance) -> None:
    report = validate_instance(instance)
    if not report.ok:
        raise InvalidInstanceError("; ".join(report.violations))
