"""Reading game specs and writing/reading result documents (JSON or YAML)."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .model import (
    AdditiveSetFunction,
    AttackerSpace,
    GameInstance,
    ModelError,
    SetFunction,
    UtilityProfile,
    mask_of,
    members,
    zero_sum_complete,
)
from .oracles import spec_from_doc
from .solvers import EquilibriumResult

PROB_CUTOFF = 1e-9
SIG_DIGITS = 9

_ADDITIVE_KEYS = ("benefit_attacker", "loss_attacker", "benefit_defender", "loss_defender")
_SPARSE_KEYS = ("b_a", "l_a", "b_d", "l_d")


def read_document(path) -> Any:
    text = Path(path).read_text()
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ModelError(f"{path}: not valid JSON/YAML: {e}") from None


def _targets(raw, n: int, where: str) -> int:
    try:
        idx = [int(i) for i in raw]
    except (TypeError, ValueError):
        raise ModelError(f"{where}: set must be a list of target indices, got {raw!r}") from None
    bad = [i for i in idx if not 0 <= i < n]
    if bad:
        raise ModelError(f"{where}: target {bad[0]} outside 0..{n - 1}")
    return mask_of(idx)


def profile_from_doc(doc: Mapping, n: int, budget: int, zero_sum: bool) -> UtilityProfile:
    if "additive" in doc:
        add = doc["additive"]
        vals = {}
        for key in _ADDITIVE_KEYS:
            if key in add:
                v = tuple(float(x) for x in add[key])
                if len(v) != n:
                    raise ModelError(f"utilities.additive.{key} has {len(v)} values, n={n}")
                vals[key] = AdditiveSetFunction(v)
        for key in ("benefit_attacker", "loss_attacker"):
            if key not in vals:
                raise ModelError(f"utilities.additive.{key} is required")
        if zero_sum and "benefit_defender" not in vals and "loss_defender" not in vals:
            return zero_sum_complete(vals["benefit_attacker"], vals["loss_attacker"], n, budget)
        zero = AdditiveSetFunction((0.0,) * n)
        return UtilityProfile(vals["benefit_attacker"], vals["loss_attacker"],
                              vals.get("benefit_defender", zero), vals.get("loss_defender", zero),
                              n, budget, zero_sum)
    if "sparse" in doc:
        entries: dict[str, dict[int, float]] = {k: {} for k in _SPARSE_KEYS}
        for j, row in enumerate(doc["sparse"] or []):
            m = _targets(row.get("set", []), n, f"utilities.sparse[{j}]")
            for k in _SPARSE_KEYS:
                if k in row and row[k] is not None:
                    entries[k][m] = entries[k].get(m, 0.0) + float(row[k])
        fs = {k: SetFunction(v) for k, v in entries.items()}
        if zero_sum and not entries["b_d"] and not entries["l_d"]:
            return zero_sum_complete(fs["b_a"], fs["l_a"], n, budget)
        return UtilityProfile(fs["b_a"], fs["l_a"], fs["b_d"], fs["l_d"], n, budget, zero_sum)
    raise ModelError("utilities must contain 'additive' or 'sparse'")


def game_from_doc(doc: Mapping) -> GameInstance:
    if not isinstance(doc, Mapping):
        raise ModelError("game spec must be a mapping")
    for key in ("n", "attacker_budget", "utilities", "defender_system"):
        if key not in doc:
            raise ModelError(f"game spec is missing {key!r}")
    n, c = int(doc["n"]), int(doc["attacker_budget"])
    if c < 1:
        raise ModelError("attacker_budget must be at least 1")
    zero_sum = bool(doc.get("zero_sum", False))
    profile = profile_from_doc(doc["utilities"], n, c, zero_sum)
    return GameInstance(AttackerSpace(n, c), spec_from_doc(doc["defender_system"], n), profile)


def load_game(path) -> GameInstance:
    return game_from_doc(read_document(path))


def _num(x: float) -> float:
    x = float(x)
    return 0.0 if x == 0 else float(f"{x:.{SIG_DIGITS}g}")


def _clean(obj):
    if isinstance(obj, Mapping):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def _strategy_list(mixed) -> list[dict]:
    return [{"set": members(m), "prob": _num(p)} for m, p in mixed if p >= PROB_CUTOFF]


def result_to_doc(res: EquilibriumResult) -> dict:
    doc = {
        "concept": res.concept,
        "defender_mixed": _strategy_list(res.defender_mixed),
        "attacker_mixed": _strategy_list(res.attacker_mixed),
        "defender_value": _num(res.defender_value),
        "attacker_value": _num(res.attacker_value),
        "coverage": [_num(x) for x in res.coverage],
    }
    if res.attacker_marginals is not None:
        doc["attacker_marginals"] = [_num(x) for x in res.attacker_marginals]
    doc["diagnostics"] = _clean(res.diagnostics)
    return doc


def distribution_from_doc(rows, n: int, where: str) -> dict[int, float]:
    out: dict[int, float] = {}
    for j, row in enumerate(rows or []):
        m = _targets(row["set"], n, f"{where}[{j}]")
        out[m] = out.get(m, 0.0) + float(row["prob"])
    total = sum(out.values())
    if total <= 0:
        raise ModelError(f"{where} is empty")
    return {m: p / total for m, p in out.items()}
