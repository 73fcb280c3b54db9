"""Experiment harness: regret metrics, significance testing, sweeps, and the
variance-bias Monte Carlo.

Normalized regret over a split is ``100 * sum(regret_i) / (sum |c_i^T x*(c_i)| + 1e-12)``.
A split whose optimal objectives sum to zero is flagged rather than dropped.

The sweep runner regenerates data per seed (fresh mixing matrix), trains one
model per (problem, t, noise, method, policy, seed) cell, and pairs each
robust policy against its empirical counterpart within the same method using
a two-sided paired Student t-test.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (Dataset, DimensionError, RngStream, STREAM_BIAS_DEMO,
                   STREAM_INSTANCE, STREAM_TEST_SAMPLES, STREAM_TRAIN_SAMPLES,
                   STREAM_VAL_SAMPLES)
from .datagen import GenParams, generate_samples, make_gen_model
from .learning import TrainConfig, train
from .oracles import (DenseTSP, GridShortestPath, OracleAudit, UncertaintyParams,
                      solve)
from .targets import (Empirical, KNN, RobustOpt, TargetPolicy, TopK,
                      build_targets, policy_label)


# ---------------------------------------------------------------------------
# Regret evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegretReport:
    split: str
    model_id: str
    per_sample: np.ndarray
    normalized_regret_pct: float
    expected_normalized_regret_pct: Optional[float]
    denominator_zero: bool


def _check_pred(pred_costs, ds: Dataset) -> np.ndarray:
    pred = np.asarray(pred_costs, dtype=np.float64)
    if pred.shape != ds.costs.shape:
        raise DimensionError(
            f"predictions have shape {pred.shape}, dataset costs {ds.costs.shape}")
    return pred


def eval_regret(pred_costs, ds: Dataset, inst, audit: Optional[OracleAudit] = None,
                split: str = "", model_id: str = "") -> RegretReport:
    """Empirical regret of predicted costs: ``c^T x*(chat) - c^T x*(c)``."""
    pred = _check_pred(pred_costs, ds)
    t = len(ds)
    regrets = np.empty(t)
    opt_vals = np.empty(t)
    for i in range(t):
        xhat = solve(inst, pred[i], audit)
        xopt = solve(inst, ds.costs[i], audit)
        opt_vals[i] = float(np.dot(ds.costs[i], xopt))
        regrets[i] = float(np.dot(ds.costs[i], xhat)) - opt_vals[i]
    denom = float(np.sum(np.abs(opt_vals)))
    pct = 100.0 * float(np.sum(regrets)) / (denom + 1e-12)
    return RegretReport(split=split, model_id=model_id, per_sample=regrets,
                        normalized_regret_pct=pct,
                        expected_normalized_regret_pct=None,
                        denominator_zero=(denom == 0.0))


def eval_expected_regret(pred_costs, ds: Dataset, inst,
                         audit: Optional[OracleAudit] = None) -> float:
    """Regret against the conditional-mean costs stored by the generator."""
    if ds.clean_costs is None:
        raise ValueError("dataset has no clean costs; regenerate with them")
    pred = _check_pred(pred_costs, ds)
    t = len(ds)
    regrets = np.empty(t)
    opt_vals = np.empty(t)
    for i in range(t):
        xhat = solve(inst, pred[i], audit)
        xopt = solve(inst, ds.clean_costs[i], audit)
        opt_vals[i] = float(np.dot(ds.clean_costs[i], xopt))
        regrets[i] = float(np.dot(ds.clean_costs[i], xhat)) - opt_vals[i]
    return 100.0 * float(np.sum(regrets)) / (float(np.sum(np.abs(opt_vals))) + 1e-12)


# ---------------------------------------------------------------------------
# Paired t-test via the regularized incomplete beta function
# ---------------------------------------------------------------------------

_BETA_TOL = 1e-10
_BETA_MAX_ITER = 500


def _beta_cont_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz), iterated
    to relative tolerance 1e-10."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_TOL:
            return h
    raise RuntimeError("incomplete beta continued fraction failed to converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log(1.0 - x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cont_fraction(a, b, x) / a
    return 1.0 - front * _beta_cont_fraction(b, a, 1.0 - x) / b


@dataclass(frozen=True)
class TTestResult:
    t_stat: float
    p_value: float
    significant: bool


def paired_t_test(a: Sequence[float], b: Sequence[float],
                  alpha: float = 0.05) -> TTestResult:
    """Two-sided paired Student t-test on seed-paired observations.

    Conventions: all-zero differences give ``(t=0, p=1)``; zero variance with
    a nonzero mean gives ``p=0`` (maximally significant).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError("paired samples must be equal-length vectors")
    r = a.shape[0]
    if r < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    mean = float(d.mean())
    var = float(np.sum((d - mean) ** 2)) / (r - 1)
    if var == 0.0:
        if mean == 0.0:
            return TTestResult(t_stat=0.0, p_value=1.0, significant=False)
        sign = 1.0 if mean > 0 else -1.0
        return TTestResult(t_stat=sign * math.inf, p_value=0.0,
                           significant=(0.0 < alpha))
    t = mean / math.sqrt(var / r)
    df = r - 1
    p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return TTestResult(t_stat=t, p_value=p, significant=(p < alpha))


# ---------------------------------------------------------------------------
# Variance-bias Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BiasDemoConfig:
    n_h: int
    n_l: int
    sigma_h: float
    sigma_l: float
    trials: int
    seed: int = 0

    def __post_init__(self):
        if self.n_h < 1 or self.n_l < 1 or self.n_h + self.n_l < 2:
            raise ValueError("need at least one decision per group and two total")
        if self.sigma_h < 0 or self.sigma_l < 0:
            raise ValueError("standard deviations must be non-negative")
        if self.trials < 1:
            raise ValueError("need at least one trial")


@dataclass(frozen=True)
class BiasDemoResult:
    config: BiasDemoConfig
    counts: np.ndarray        # wins per decision, high group first
    frequencies: np.ndarray
    high_mean_freq: float
    low_mean_freq: float

    def to_dict(self) -> dict:
        return {
            "n_h": self.config.n_h,
            "n_l": self.config.n_l,
            "sigma_h": self.config.sigma_h,
            "sigma_l": self.config.sigma_l,
            "trials": self.config.trials,
            "seed": self.config.seed,
            "counts": [int(k) for k in self.counts],
            "frequencies": [float(f) for f in self.frequencies],
            "high_mean_freq": self.high_mean_freq,
            "low_mean_freq": self.low_mean_freq,
        }


def bias_demo(cfg: BiasDemoConfig) -> BiasDemoResult:
    """Monte Carlo of a one-of-n selection with independent zero-mean normal
    coefficients: decisions 0..n_h-1 have std ``sigma_h``, the rest
    ``sigma_l``.  Records how often each decision realizes the minimum
    (index ties go to the smallest index)."""
    n = cfg.n_h + cfg.n_l
    stream = RngStream(cfg.seed, STREAM_BIAS_DEMO)
    draws = stream.normal((cfg.trials, n))
    scale = np.concatenate([np.full(cfg.n_h, cfg.sigma_h),
                            np.full(cfg.n_l, cfg.sigma_l)])
    wins = np.argmin(draws * scale, axis=1)
    counts = np.bincount(wins, minlength=n)
    freqs = counts / cfg.trials
    return BiasDemoResult(
        config=cfg, counts=counts, frequencies=freqs,
        high_mean_freq=float(freqs[:cfg.n_h].mean()),
        low_mean_freq=float(freqs[cfg.n_h:].mean()),
    )


# ---------------------------------------------------------------------------
# Sweep runner
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    problems: Tuple[dict, ...]
    t_values: Tuple[int, ...]
    noise_values: Tuple[float, ...]
    methods: Tuple[str, ...]
    policies: Tuple[dict, ...]
    seeds: Tuple[int, ...]
    epochs_by_t: Dict[int, int]
    features: int = 5
    degree: int = 6
    val_size: int = 100
    test_size: int = 1000
    batch_size: int = 32
    lr: float = 0.01
    pfyl_samples: int = 1
    pfyl_sigma: float = 1.0
    alpha: float = 0.05
    instance_seed: int = 0

    @staticmethod
    def from_dict(d: dict) -> "SweepConfig":
        return SweepConfig(
            problems=tuple(d["problems"]),
            t_values=tuple(int(t) for t in d["t_values"]),
            noise_values=tuple(float(e) for e in d["noise_values"]),
            methods=tuple(d["methods"]),
            policies=tuple(d["policies"]),
            seeds=tuple(int(s) for s in d["seeds"]),
            epochs_by_t={int(k): int(v) for k, v in d["epochs_by_t"].items()},
            features=int(d.get("features", 5)),
            degree=int(d.get("degree", 6)),
            val_size=int(d.get("val_size", 100)),
            test_size=int(d.get("test_size", 1000)),
            batch_size=int(d.get("batch_size", 32)),
            lr=float(d.get("lr", 0.01)),
            pfyl_samples=int(d.get("pfyl_samples", 1)),
            pfyl_sigma=float(d.get("pfyl_sigma", 1.0)),
            alpha=float(d.get("alpha", 0.05)),
            instance_seed=int(d.get("instance_seed", 0)),
        )


def default_sweep_config() -> dict:
    """Desk-scale defaults: 5x5 grid (t in {100, 1000}) and 8-node TSP
    (t=100), 10 seeds, 200 epochs at t=100 and 100 at t=1000."""
    return {
        "problems": [
            {"kind": "grid", "v": 5, "h": 5, "t_values": [100, 1000]},
            {"kind": "tsp", "nodes": 8, "t_values": [100]},
        ],
        "t_values": [100],
        "noise_values": [0.0, 0.5, 1.0],
        "methods": ["spo+", "pfyl", "mse"],
        "policies": [
            {"kind": "empirical"},
            {"kind": "ro", "rho": 0.5, "gamma_frac": 0.125},
            {"kind": "topk", "k": 10},
            {"kind": "knn", "k": 10, "w": 0.5},
        ],
        "seeds": list(range(10)),
        "epochs_by_t": {"100": 200, "1000": 100},
    }


def build_instance(problem: dict, instance_seed: int = 0):
    kind = problem["kind"]
    if kind == "grid":
        return GridShortestPath(int(problem["v"]), int(problem["h"]))
    if kind == "tsp":
        nodes = int(problem["nodes"])
        stream = RngStream(instance_seed, STREAM_INSTANCE)
        coords = [(round(stream.uniform(0.0, 1.0), 6), round(stream.uniform(0.0, 1.0), 6))
                  for _ in range(nodes)]
        return DenseTSP(nodes, coords=coords)
    raise ValueError(f"unknown problem kind {kind!r}")


def _policy_from_sweep_entry(entry: dict, n: int) -> Optional[TargetPolicy]:
    kind = entry["kind"]
    if kind == "empirical":
        return Empirical()
    if kind == "ro":
        gamma = float(entry["gamma_frac"]) * n if "gamma_frac" in entry else float(entry["gamma"])
        return RobustOpt(UncertaintyParams(rho=float(entry["rho"]), gamma=gamma))
    if kind == "topk":
        return TopK(k=int(entry["k"]))
    if kind == "knn":
        return KNN(k=int(entry["k"]), w=float(entry["w"]))
    raise ValueError(f"unknown policy kind {kind!r}")


SWEEP_COLUMNS = [
    "row_type", "problem", "t", "noise", "method", "policy", "seed", "status",
    "test_regret_pct", "test_expected_regret_pct",
    "precompute_solves", "gradient_solves", "eval_solves", "wall_time_s",
    "mean_regret_pct", "std_regret_pct", "t_stat", "p_value", "marker",
]


def _run_one(inst, t: int, noise: float, method: str, policy: Optional[TargetPolicy],
             seed: int, cfg: SweepConfig) -> dict:
    params = GenParams(m=cfg.features, deg=cfg.degree, noise_halfwidth=noise,
                       t_train=t, t_val=cfg.val_size, t_test=cfg.test_size,
                       seed=seed)
    gm = make_gen_model(inst, cfg.features, seed)
    train_ds = generate_samples(gm, t, params, RngStream(seed, STREAM_TRAIN_SAMPLES), "train")
    val_ds = generate_samples(gm, cfg.val_size, params, RngStream(seed, STREAM_VAL_SAMPLES), "val")
    test_ds = generate_samples(gm, cfg.test_size, params, RngStream(seed, STREAM_TEST_SAMPLES), "test")

    if method == "mse":
        targets = None
        train_policy: TargetPolicy = Empirical()  # placeholder, unused
    else:
        targets = build_targets(policy, train_ds, inst)
        train_policy = policy
    tc = TrainConfig(method=method, policy=train_policy,
                     epochs=cfg.epochs_by_t[t], batch_size=cfg.batch_size,
                     lr=cfg.lr, seed=seed, pfyl_samples=cfg.pfyl_samples,
                     pfyl_sigma=cfg.pfyl_sigma)
    model = train(tc, train_ds, val_ds, inst, targets)
    pred = model.predictor.predict_batch(test_ds.features)
    report = eval_regret(pred, test_ds, inst, split="test")
    expected = eval_expected_regret(pred, test_ds, inst)
    return {
        "test_regret_pct": report.normalized_regret_pct,
        "test_expected_regret_pct": expected,
        "precompute_solves": model.audit.precompute,
        "gradient_solves": model.audit.gradient,
        "eval_solves": model.audit.evaluation,
    }


def run_sweep(cfg: SweepConfig) -> List[dict]:
    """Run the full experiment grid; returns detail rows followed by one
    aggregate row per cell.  Individual run failures are recorded in the
    ``status`` column and the sweep continues."""
    detail_rows: List[dict] = []
    for problem in cfg.problems:
        inst = build_instance(problem, cfg.instance_seed)
        label = inst.descriptor()
        for t in problem.get("t_values", cfg.t_values):
            for noise in cfg.noise_values:
                for method in cfg.methods:
                    policy_entries = ([{"kind": "mse"}] if method == "mse"
                                      else list(cfg.policies))
                    for entry in policy_entries:
                        if method == "mse":
                            policy, plabel = None, "mse"
                        else:
                            policy = _policy_from_sweep_entry(entry, inst.n)
                            plabel = policy_label(policy)
                        for seed in cfg.seeds:
                            row = {k: "" for k in SWEEP_COLUMNS}
                            row.update(row_type="detail", problem=label, t=t,
                                       noise=noise, method=method, policy=plabel,
                                       seed=seed)
                            start = time.perf_counter()
                            try:
                                row.update(_run_one(inst, t, noise, method,
                                                    policy, seed, cfg))
                                row["status"] = "ok"
                            except Exception as exc:  # recorded, sweep continues
                                row["status"] = f"error: {exc}"
                            row["wall_time_s"] = time.perf_counter() - start
                            detail_rows.append(row)

    aggregate_rows: List[dict] = []
    groups: Dict[tuple, List[dict]] = {}
    for row in detail_rows:
        key = (row["problem"], row["t"], row["noise"], row["method"], row["policy"])
        groups.setdefault(key, []).append(row)

    def seed_series(key):
        return {r["seed"]: r["test_regret_pct"]
                for r in groups.get(key, []) if r["status"] == "ok"}

    for key, rows in groups.items():
        problem, t, noise, method, plabel = key
        vals = [r["test_regret_pct"] for r in rows if r["status"] == "ok"]
        agg = {k: "" for k in SWEEP_COLUMNS}
        agg.update(row_type="aggregate", problem=problem, t=t, noise=noise,
                   method=method, policy=plabel, status=f"ok:{len(vals)}/{len(rows)}")
        if vals:
            agg["mean_regret_pct"] = float(np.mean(vals))
            agg["std_regret_pct"] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        emp_key = (problem, t, noise, method, policy_label(Empirical()))
        if plabel not in ("mse", policy_label(Empirical())) and vals:
            mine = seed_series(key)
            theirs = seed_series(emp_key)
            shared = sorted(set(mine) & set(theirs))
            if len(shared) >= 2:
                res = paired_t_test([mine[s] for s in shared],
                                    [theirs[s] for s in shared], cfg.alpha)
                agg["t_stat"] = res.t_stat
                agg["p_value"] = res.p_value
                if res.significant:
                    agg["marker"] = "*" if res.t_stat < 0 else "x"
        aggregate_rows.append(agg)
    return detail_rows + aggregate_rows


def write_sweep_csv(rows: List[dict], path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                             for k, v in row.items()})
