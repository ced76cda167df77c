"""Build game instances from NVD vulnerability records.

Accepted files are JSON in either the legacy feed layout (``CVE_Items``
with ``impact.baseMetricV2``) or the 2.0 API layout (``vulnerabilities``
with ``cve.metrics``). CVSS v2 scores are preferred; v3.x is used when v2
is missing. A record is tagged with a technology when one of that
technology's keywords occurs (case-insensitive, whole word) in its
description or configuration CPE strings.

Scores map to the game as: base score -> attacker reward per unit time,
impact score -> defender loss per unit time, exploitability score ->
rate of the exponential compromise time.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .model import (
    AttackerType,
    AttackerTypeSet,
    AttackTimeModel,
    ConfigurationSpace,
    GameInstance,
    InvalidInstanceError,
    require_valid,
)

ATTACK_TIME_MODES = ("exponential", "mean-of-samples")


class MalformedRecordError(ValueError):
    pass


@dataclass(frozen=True)
class VulnRecord:
    cve_id: str
    base_score: float
    impact_score: float
    exploitability_score: float
    technologies: FrozenSet[str]
    text: str = ""


@dataclass
class ParseResult:
    records: List[VulnRecord]
    skipped_unscored: int = 0
    skipped_unmatched: int = 0

    @property
    def skipped(self) -> int:
        return self.skipped_unscored + self.skipped_unmatched

    def __iter__(self) -> Iterator[VulnRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, k):
        return self.records[k]


def _keyword_patterns(keywords: Mapping[str, Sequence[str]]) -> Dict[str, re.Pattern]:
    out = {}
    for label, words in keywords.items():
        alts = "|".join(re.escape(w) for w in (words or [label]))
        out[label] = re.compile(rf"(?<![A-Za-z0-9])(?:{alts})(?![A-Za-z0-9])", re.IGNORECASE)
    return out


def _cpe_strings(node) -> List[str]:
    out = []
    if isinstance(node, dict):
        for k, v in node.items():
            if k in ("cpe23Uri", "criteria") and isinstance(v, str):
                out.append(v.replace(":", " ").replace("_", " "))
            else:
                out.extend(_cpe_strings(v))
    elif isinstance(node, list):
        for v in node:
            out.extend(_cpe_strings(v))
    return out


def _legacy_entry(item) -> Tuple[str, str, Optional[Tuple[float, float, float]], list]:
    cve = item["cve"]
    cid = cve["CVE_data_meta"]["ID"]
    desc = " ".join(d.get("value", "") for d in cve.get("description", {}).get("description_data", []))
    impact = item.get("impact", {}) or {}
    scores = None
    m2 = impact.get("baseMetricV2")
    if m2 and "cvssV2" in m2:
        scores = (m2["cvssV2"].get("baseScore"), m2.get("impactScore"), m2.get("exploitabilityScore"))
    else:
        m3 = impact.get("baseMetricV3")
        if m3 and "cvssV3" in m3:
            scores = (m3["cvssV3"].get("baseScore"), m3.get("impactScore"), m3.get("exploitabilityScore"))
    return cid, desc, scores, _cpe_strings(item.get("configurations", {}))


def _api_entry(item) -> Tuple[str, str, Optional[Tuple[float, float, float]], list]:
    cve = item["cve"]
    cid = cve["id"]
    desc = " ".join(d.get("value", "") for d in cve.get("descriptions", []) if d.get("lang", "en") == "en")
    metrics = cve.get("metrics", {}) or {}
    scores = None
    for key in ("cvssMetricV2", "cvssMetricV31", "cvssMetricV30"):
        entries = metrics.get(key) or []
        if entries:
            m = entries[0]
            scores = (m.get("cvssData", {}).get("baseScore"), m.get("impactScore"), m.get("exploitabilityScore"))
            break
    return cid, desc, scores, _cpe_strings(cve.get("configurations", []))


def parse_cve_records(path, technology_keywords: Mapping[str, Sequence[str]]) -> ParseResult:
    """Read one NVD JSON file into tagged records.

    Entries without usable scores, or matching no technology, are skipped
    and counted. Structurally broken entries raise ``MalformedRecordError``.
    """
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return ParseResult([])
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"{path}: not valid JSON (line {exc.lineno}): {exc.msg}") from None
    if isinstance(doc, dict) and "CVE_Items" in doc:
        items, read = doc["CVE_Items"], _legacy_entry
    elif isinstance(doc, dict) and "vulnerabilities" in doc:
        items, read = doc["vulnerabilities"], _api_entry
    elif isinstance(doc, list):
        items, read = doc, None
    else:
        raise MalformedRecordError(f"{path}: expected 'CVE_Items' or 'vulnerabilities' at top level")
    patterns = _keyword_patterns(technology_keywords)
    out = ParseResult([])
    for k, item in enumerate(items):
        try:
            reader = read or (_api_entry if "id" in item.get("cve", {}) else _legacy_entry)
            cid, desc, scores, cpes = reader(item)
        except (KeyError, TypeError, AttributeError) as exc:
            raise MalformedRecordError(f"{path}: record {k} is malformed (missing {exc})") from None
        if scores is None or any(s is None for s in scores):
            out.skipped_unscored += 1
            continue
        bs, is_, es = (float(s) for s in scores)
        if not (0 <= bs <= 10 and 0 <= is_ <= 10 and 0 < es <= 10):
            out.skipped_unscored += 1
            continue
        haystack = " ".join([desc] + cpes)
        techs = frozenset(label for label, pat in patterns.items() if pat.search(haystack))
        if not techs:
            out.skipped_unmatched += 1
            continue
        out.records.append(VulnRecord(cid, bs, is_, es, techs, desc))
    return out


# -- recipes --------------------------------------------------------------------


@dataclass
class InstanceRecipe:
    # state id -> technology tuple (one label per aspect)
    states: Dict[str, Tuple[str, ...]]
    # type id -> (technology set, prior)
    types: Dict[str, Tuple[FrozenSet[str], float]]
    migration: np.ndarray
    tau_lo: float = 0.1
    tau_hi: float = 2.6
    tau_step: float = 0.1
    alpha: float = 1.0
    gamma: Optional[float] = None
    updating_cost: Optional[float] = None
    aspects: Optional[Dict[str, Tuple[str, ...]]] = None
    keywords: Dict[str, List[str]] = field(default_factory=dict)
    attack_time_mode: str = "exponential"
    samples: int = 1000
    seed: int = 0

    def problems(self) -> List[str]:
        out = []
        pri = [p for _, p in self.types.values()]
        if any(p < 0 for p in pri) or abs(sum(pri) - 1.0) > 1e-9:
            out.append("type priors must sum to 1")
        if self.attack_time_mode not in ATTACK_TIME_MODES:
            out.append(f"attack_time_mode must be one of {ATTACK_TIME_MODES}")
        if self.aspects:
            names = list(self.aspects)
            for s, techs in self.states.items():
                if len(techs) != len(names):
                    out.append(f"state {s!r} needs one technology per aspect")
                    continue
                for name, t in zip(names, techs):
                    if t not in self.aspects[name]:
                        out.append(f"state {s!r}: {t!r} is not a declared {name!r} label")
        M = np.asarray(self.migration, dtype=float)
        if M.shape != (len(self.states), len(self.states)):
            out.append("migration matrix must be n x n")
        return out

    def technology_keywords(self) -> Dict[str, List[str]]:
        labels = set()
        for techs in self.states.values():
            labels.update(techs)
        for techs, _ in self.types.values():
            labels.update(techs)
        return {t: list(self.keywords.get(t, [t])) for t in sorted(labels)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "InstanceRecipe":
        at = d.get("attack_time", {}) or {}
        return cls(
            states={s["id"]: tuple(s["technologies"]) for s in d["states"]},
            types={t["id"]: (frozenset(t["technologies"]), float(t["prior"])) for t in d["types"]},
            migration=np.asarray(d["migration"], dtype=float),
            tau_lo=float(d.get("tau_lo", 0.1)),
            tau_hi=float(d.get("tau_hi", 2.6)),
            tau_step=float(d.get("tau_step", 0.1)),
            alpha=float(d.get("alpha", 1.0)),
            gamma=d.get("gamma"),
            updating_cost=d.get("updating_cost"),
            aspects={k: tuple(v) for k, v in d["aspects"].items()} if d.get("aspects") else None,
            keywords={k: list(v) for k, v in (d.get("keywords") or {}).items()},
            attack_time_mode=at.get("mode", "exponential"),
            samples=int(at.get("samples", 1000)),
            seed=int(at.get("seed", 0)),
        )

    def to_dict(self) -> dict:
        return {
            "states": [{"id": s, "technologies": list(t)} for s, t in self.states.items()],
            "aspects": {k: list(v) for k, v in self.aspects.items()} if self.aspects else None,
            "types": [{"id": l, "technologies": sorted(t), "prior": p} for l, (t, p) in self.types.items()],
            "keywords": self.keywords,
            "migration": np.asarray(self.migration).tolist(),
            "updating_cost": self.updating_cost,
            "tau_lo": self.tau_lo,
            "tau_hi": self.tau_hi,
            "tau_step": self.tau_step,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "attack_time": {"mode": self.attack_time_mode, "samples": self.samples, "seed": self.seed},
        }


def _attack_time(record: VulnRecord, recipe: InstanceRecipe, rng: np.random.Generator) -> AttackTimeModel:
    rate = record.exploitability_score
    if recipe.attack_time_mode == "mean-of-samples":
        return AttackTimeModel.deterministic(float(rng.exponential(1.0 / rate, size=recipe.samples).mean()))
    return AttackTimeModel.exponential(rate)


def build_instance(records: Sequence[VulnRecord], recipe: InstanceRecipe) -> GameInstance:
    """One attack per record that reaches some state; types get the records touching their technologies."""
    issues = recipe.problems()
    if issues:
        raise InvalidInstanceError("; ".join(issues))
    states = list(recipe.states)
    state_tech = [set(recipe.states[s]) for s in states]
    used = [r for r in records if any(r.technologies & t for t in state_tech)]
    ids, seen = [], set()
    for r in used:
        if r.cve_id in seen:
            raise ValueError(f"duplicate record id {r.cve_id!r}")
        seen.add(r.cve_id)
        ids.append(r.cve_id)
    spaces = []
    for l, (techs, prior) in recipe.types.items():
        A = tuple(r.cve_id for r in used if r.technologies & techs)
        if not A:
            raise InvalidInstanceError(f"attacker type {l!r} has an empty attack space")
        spaces.append(AttackerType(l, prior, A))
    n, na = len(states), len(used)
    R = np.zeros((na, n))
    C = np.zeros((na, n))
    rng = np.random.default_rng(recipe.seed)
    table = []
    for a, r in enumerate(used):
        model = _attack_time(r, recipe, rng)
        row = []
        for j, techs in enumerate(state_tech):
            if r.technologies & techs:
                R[a, j] = r.base_score
                C[a, j] = r.impact_score
                row.append(model)
            else:
                row.append(AttackTimeModel.infinite())
        table.append(tuple(row))
    M = np.array(recipe.migration, dtype=float)
    if recipe.updating_cost is not None:
        np.fill_diagonal(M, recipe.updating_cost)
    nt = len(spaces)
    aspects = tuple((k, tuple(v)) for k, v in recipe.aspects.items()) if recipe.aspects else None
    inst = GameInstance(
        space=ConfigurationSpace(tuple(states), tuple(recipe.states[s] for s in states), aspects),
        attackers=AttackerTypeSet(tuple(spaces)),
        attacks=tuple(ids),
        reward=np.broadcast_to(R, (nt, na, n)),
        loss=np.broadcast_to(C, (nt, na, n)),
        attack_time=tuple(table),
        migration=M,
        tau_lo=recipe.tau_lo,
        tau_hi=recipe.tau_hi,
        tau_step=recipe.tau_step,
        alpha=recipe.alpha,
        gamma=recipe.gamma,
    )
    require_valid(inst)
    return inst
