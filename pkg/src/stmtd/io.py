"""JSON files for instances, recipes and policies.

Instance files use the field names of ``GameInstance``; reward and loss
tables are nested maps ``type -> attack -> state -> value`` (entries for
attacks outside a type's space may be omitted and default to 0), and
``attack_time`` is ``attack -> state -> {kind, ...}``.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from .model import (
    AttackerType,
    AttackerTypeSet,
    AttackTimeModel,
    ConfigurationSpace,
    DefenderPolicy,
    GameInstance,
)
from .nvd import InstanceRecipe

PathLike = Union[str, Path]


def instance_to_dict(inst: GameInstance) -> dict:
    states = list(inst.states)
    sp = inst.space
    out = {
        "states": states if sp.labels is None else [{"id": s, "labels": list(t)} for s, t in zip(states, sp.labels)],
        "aspects": None if sp.aspects is None else {k: list(v) for k, v in sp.aspects},
        "attacks": list(inst.attacks),
        "types": [{"id": t.id, "prior": t.prior, "attacks": list(t.attacks)} for t in inst.types],
        "reward": {},
        "loss": {},
        "attack_time": {
            a: {s: m.to_dict() for s, m in zip(states, row)} for a, row in zip(inst.attacks, inst.attack_time)
        },
        "migration": np.asarray(inst.migration).tolist(),
        "tau_lo": inst.tau_lo,
        "tau_hi": inst.tau_hi,
        "tau_step": inst.tau_step,
        "alpha": inst.alpha,
        "gamma": inst.gamma,
    }
    for key, table in (("reward", inst.reward), ("loss", inst.loss)):
        for l, t in enumerate(inst.types):
            out[key][t.id] = {
                a: {s: float(table[l, inst.attack_index[a], j]) for j, s in enumerate(states)} for a in t.attacks
            }
    return out


def instance_from_dict(d: Mapping) -> GameInstance:
    raw_states = d["states"]
    if raw_states and isinstance(raw_states[0], Mapping):
        states = [s["id"] for s in raw_states]
        labels = tuple(tuple(s.get("labels", ())) for s in raw_states)
    else:
        states, labels = list(raw_states), None
    aspects = d.get("aspects")
    aspects = None if not aspects else tuple((k, tuple(v)) for k, v in aspects.items())
    types = [AttackerType(t["id"], float(t["prior"]), tuple(t["attacks"])) for t in d["types"]]
    attacks = list(d.get("attacks") or [])
    for t in types:
        for a in t.attacks:
            if a not in attacks:
                attacks.append(a)
    aidx = {a: k for k, a in enumerate(attacks)}
    sidx = {s: j for j, s in enumerate(states)}
    n, na, nt = len(states), len(attacks), len(types)
    tables = {}
    for key in ("reward", "loss"):
        arr = np.zeros((nt, na, n))
        for l, t in enumerate(types):
            for a, row in (d[key].get(t.id) or {}).items():
                for s, v in row.items():
                    arr[l, aidx[a], sidx[s]] = float(v)
        tables[key] = arr
    at = []
    for a in attacks:
        row = d["attack_time"].get(a, {})
        at.append(tuple(AttackTimeModel.from_dict(row[s]) if s in row else AttackTimeModel.infinite() for s in states))
    return GameInstance(
        space=ConfigurationSpace(tuple(states), labels, aspects),
        attackers=AttackerTypeSet(tuple(types)),
        attacks=tuple(attacks),
        reward=tables["reward"],
        loss=tables["loss"],
        attack_time=tuple(at),
        migration=np.asarray(d["migration"], dtype=float),
        tau_lo=float(d["tau_lo"]),
        tau_hi=float(d["tau_hi"]),
        tau_step=float(d["tau_step"]),
        alpha=float(d.get("alpha", 1.0)),
        gamma=d.get("gamma"),
    )


def _write(obj, path: PathLike) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _read(path: PathLike):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_instance(inst: GameInstance, path: PathLike) -> None:
    _write(instance_to_dict(inst), path)


def load_instance(path: PathLike) -> GameInstance:
    return instance_from_dict(_read(path))


def save_policy(policy: DefenderPolicy, path: PathLike) -> None:
    _write(policy.to_dict(), path)


def load_policy(path: PathLike) -> DefenderPolicy:
    d = _read(path)
    # accept a full solve report as well as a bare policy
    if "policy" in d:
        d = d["policy"]
    return DefenderPolicy.from_dict(d)


def save_recipe(recipe: InstanceRecipe, path: PathLike) -> None:
    _write(recipe.to_dict(), path)


def load_recipe(path: PathLike) -> InstanceRecipe:
    return InstanceRecipe.from_dict(_read(path))


def data_path(name: str) -> Path:
    """Path of a file bundled in the package's data directory."""
    return Path(str(resources.files("stmtd") / "data" / name))


def synthetic_instance() -> GameInstance:
    """The bundled four-configuration instance (exponential compromise times)."""
    return load_instance(data_path("synthetic_instance.json"))
