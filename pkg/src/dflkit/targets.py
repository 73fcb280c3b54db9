"""Target policies: per-sample (cost, decision) pairs precomputed before training.

Four policies are supported.  ``Empirical`` pairs each sample's realized cost
with its optimal decision; ``RobustOpt`` swaps in the budget-robust decision
(keeping the realized cost, which is what the downstream regret uses);
``TopK`` keeps the best ``k`` decisions under the realized cost; ``KNN``
replaces the cost with interpolated neighbour costs
``w * c_neighbour + (1 - w) * c`` and solves each of them.

The query point is excluded from its own neighbour set: including it would
collapse the first interpolated cost to the sample's own cost and weaken the
estimator.  Distances are plain Euclidean in raw feature space, brute force.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from .core import Dataset, DimensionError
from .oracles import OracleAudit, UncertaintyParams, robust_solve, solve, top_k_solve


@dataclass(frozen=True)
class Empirical:
    pass


@dataclass(frozen=True)
class RobustOpt:
    u: UncertaintyParams


@dataclass(frozen=True)
class TopK:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass(frozen=True)
class KNN:
    k: int
    w: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 <= self.w <= 1.0:
            raise ValueError("interpolation weight must lie in [0, 1]")


TargetPolicy = Union[Empirical, RobustOpt, TopK, KNN]


def policy_label(policy: TargetPolicy) -> str:
    if isinstance(policy, Empirical):
        return "emp"
    if isinstance(policy, RobustOpt):
        return f"ro(rho={policy.u.rho:g};gamma={policy.u.gamma:g})"
    if isinstance(policy, TopK):
        return f"topk(k={policy.k})"
    return f"knn(k={policy.k};w={policy.w:g})"


def policy_to_dict(policy: TargetPolicy) -> dict:
    if isinstance(policy, Empirical):
        return {"kind": "empirical"}
    if isinstance(policy, RobustOpt):
        return {"kind": "ro", "rho": policy.u.rho, "gamma": policy.u.gamma}
    if isinstance(policy, TopK):
        return {"kind": "topk", "k": policy.k}
    return {"kind": "knn", "k": policy.k, "w": policy.w}


def policy_from_dict(d: dict) -> TargetPolicy:
    kind = d["kind"]
    if kind == "empirical":
        return Empirical()
    if kind == "ro":
        return RobustOpt(UncertaintyParams(rho=float(d["rho"]), gamma=float(d["gamma"])))
    if kind == "topk":
        return TopK(k=int(d["k"]))
    if kind == "knn":
        return KNN(k=int(d["k"]), w=float(d["w"]))
    raise ValueError(f"unknown policy kind: {kind!r}")


def knn_neighbors(ds: Dataset, i: int, k: int) -> List[int]:
    """Indices of the ``k`` samples nearest to sample ``i`` in feature space,
    excluding ``i`` itself; distance ties break toward the smaller index."""
    t = len(ds)
    if not 1 <= k <= t - 1:
        raise ValueError(f"k={k} out of range for dataset of size {t}")
    diffs = ds.features - ds.features[i]
    dists = np.sqrt(np.sum(diffs * diffs, axis=1))
    order = np.lexsort((np.arange(t), dists))
    picked = [int(j) for j in order if j != i]
    return picked[:k]


def knn_target_costs(ds: Dataset, i: int, k: int, w: float) -> List[np.ndarray]:
    """Interpolated neighbour costs ``w * c_j + (1 - w) * c_i``."""
    c_i = ds.costs[i]
    return [w * ds.costs[j] + (1.0 - w) * c_i for j in knn_neighbors(ds, i, k)]


@dataclass(frozen=True)
class SampleTargets:
    """Targets for one sample: row ``j`` of ``costs``/``decisions`` is the
    j-th (target cost, target decision) pair.  ``ref_cost`` is the cost the
    surrogate-gradient engines subtract from the doubled prediction: the
    sample's own cost except under KNN, where it is the interpolated
    neighbour mean ``w * mean_j(c_j) + (1 - w) * c`` (this algebraic form is
    exact at ``w = 0``, keeping the KNN(w=0) run bit-identical to Empirical).
    """

    costs: np.ndarray       # (k, n)
    decisions: np.ndarray   # (k, n)
    ref_cost: np.ndarray    # (n,)

    def decision_mean(self) -> np.ndarray:
        return self.decisions.mean(axis=0)


@dataclass(frozen=True)
class TargetSet:
    policy: TargetPolicy
    per_sample: Tuple[SampleTargets, ...]
    precompute_solves: int

    def __len__(self) -> int:
        return len(self.per_sample)


def build_targets(policy: TargetPolicy, ds: Dataset, inst,
                  audit: Optional[OracleAudit] = None) -> TargetSet:
    """Precompute every sample's target pairs and record the solves consumed.

    Empirical and RobustOpt store one pair per sample; TopK and KNN store
    ``min(k, available)`` pairs.  All stored decisions are feasible by
    construction.
    """
    if ds.meta.n != inst.n:
        raise DimensionError(
            f"dataset has n={ds.meta.n} but instance expects n={inst.n}")
    if audit is None:
        audit = OracleAudit()
    start = audit.solve_count
    per_sample = []
    for i in range(len(ds)):
        c = ds.costs[i]
        if isinstance(policy, Empirical):
            x = solve(inst, c, audit)
            per_sample.append(SampleTargets(
                costs=np.array([c]), decisions=np.array([x]), ref_cost=c.copy()))
        elif isinstance(policy, RobustOpt):
            x = robust_solve(inst, c, policy.u, audit)
            per_sample.append(SampleTargets(
                costs=np.array([c]), decisions=np.array([x]), ref_cost=c.copy()))
        elif isinstance(policy, TopK):
            decs = top_k_solve(inst, c, policy.k, audit)
            per_sample.append(SampleTargets(
                costs=np.array([c] * len(decs)), decisions=np.array(decs),
                ref_cost=c.copy()))
        elif isinstance(policy, KNN):
            k = min(policy.k, len(ds) - 1)
            neighbours = knn_neighbors(ds, i, k)
            raw = np.array([ds.costs[j] for j in neighbours])
            costs_w = policy.w * raw + (1.0 - policy.w) * c
            decs = np.array([solve(inst, cw, audit) for cw in costs_w])
            ref = policy.w * raw.mean(axis=0) + (1.0 - policy.w) * c
            per_sample.append(SampleTargets(
                costs=costs_w, decisions=decs, ref_cost=ref))
        else:
            raise TypeError(f"unknown target policy: {policy!r}")
    return TargetSet(policy=policy, per_sample=tuple(per_sample),
                     precompute_solves=audit.solve_count - start)


def dataset_hash(ds: Dataset) -> str:
    h = hashlib.sha256()
    h.update(ds.features.tobytes())
    h.update(ds.costs.tobytes())
    h.update(ds.meta.instance.encode())
    return h.hexdigest()


def save_targets(ts: TargetSet, path, ds: Dataset) -> None:
    """Cache a target set as JSON keyed by dataset hash and policy params."""
    payload = {
        "dataset_hash": dataset_hash(ds),
        "policy": policy_to_dict(ts.policy),
        "precompute_solves": ts.precompute_solves,
        "per_sample": [
            {
                "costs": st.costs.tolist(),
                "decisions": st.decisions.tolist(),
                "ref_cost": st.ref_cost.tolist(),
            }
            for st in ts.per_sample
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_targets(path, ds: Dataset) -> TargetSet:
    with open(path) as fh:
        payload = json.load(fh)
    if payload["dataset_hash"] != dataset_hash(ds):
        raise ValueError("cached targets were built for a different dataset")
    per_sample = tuple(
        SampleTargets(
            costs=np.array(rec["costs"]),
            decisions=np.array(rec["decisions"]),
            ref_cost=np.array(rec["ref_cost"]),
        )
        for rec in payload["per_sample"]
    )
    return TargetSet(policy=policy_from_dict(payload["policy"]),
                     per_sample=per_sample,
                     precompute_solves=int(payload["precompute_solves"]))
