"""Linear predictor, surrogate-gradient engines, and the training loop.

Gradient engines (all return a gradient with respect to the predicted cost
vector; the chain rule to predictor parameters is ``g z^T``):

* ``spo_plus_gradient``: ``2 * (xbar - x*(2 chat - c_ref))`` where ``xbar``
  is the mean target decision and ``c_ref`` the target reference cost (the
  sample's own cost except under KNN; see ``SampleTargets.ref_cost``).
  One nominal solve per call.
* ``pfyl_gradient``: ``xbar - mean_j x*(chat + sigma * zeta_j)`` with
  standard-normal perturbations from a dedicated stream; ``samples`` nominal
  solves per call.
* ``mse_gradient``: gradient of ``(1/n) ||chat - c||^2``; no solves.

Training uses zero-initialized parameters, seeded shuffling, mean-aggregated
minibatch gradients, one bias-corrected Adam step per minibatch, and picks
the snapshot with the best validation empirical regret (earliest on ties).
Gradient-path and evaluation-path solves are audited separately.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .core import Dataset, DimensionError, RngStream, STREAM_PFYL, STREAM_SHUFFLE
from .oracles import OracleAudit, solve
from .targets import (Empirical, KNN, RobustOpt, SampleTargets, TargetPolicy,
                      TargetSet, TopK, policy_label, policy_to_dict)


class TrainingError(RuntimeError):
    """Raised when training hits a non-finite loss or gradient."""


@dataclass
class LinearPredictor:
    """``chat = theta @ z`` (plus an optional per-coefficient bias)."""

    theta: np.ndarray                 # (n, m)
    bias: Optional[np.ndarray] = None  # (n,)

    @staticmethod
    def zeros(n: int, m: int, use_bias: bool = False) -> "LinearPredictor":
        return LinearPredictor(theta=np.zeros((n, m)),
                               bias=np.zeros(n) if use_bias else None)

    def predict(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.theta.shape[1],):
            raise DimensionError(
                f"feature vector has shape {z.shape}, predictor expects "
                f"({self.theta.shape[1]},)")
        out = self.theta @ z
        if self.bias is not None:
            out = out + self.bias
        return out

    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        out = features @ self.theta.T
        if self.bias is not None:
            out = out + self.bias
        return out

    def copy(self) -> "LinearPredictor":
        return LinearPredictor(theta=self.theta.copy(),
                               bias=None if self.bias is None else self.bias.copy())


def mse_gradient(c, chat) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    chat = np.asarray(chat, dtype=np.float64)
    if c.shape != chat.shape:
        raise DimensionError("cost vectors differ in length")
    return (2.0 / c.shape[0]) * (chat - c)


def spo_plus_gradient(ts_i: SampleTargets, chat: np.ndarray, inst,
                      audit: Optional[OracleAudit] = None) -> np.ndarray:
    if ts_i.decisions.shape[0] < 1:
        raise ValueError("target list is empty")
    xbar = ts_i.decision_mean()
    x_adj = solve(inst, 2.0 * chat - ts_i.ref_cost, audit)
    return 2.0 * (xbar - x_adj)


def pfyl_gradient(ts_i: SampleTargets, chat: np.ndarray, inst,
                  samples: int, sigma: float, stream: RngStream,
                  audit: Optional[OracleAudit] = None) -> np.ndarray:
    if samples < 1:
        raise ValueError("need at least one perturbation sample")
    if sigma < 0:
        raise ValueError("perturbation amplitude must be non-negative")
    xbar = ts_i.decision_mean()
    zeta = stream.normal((samples, chat.shape[0]))
    acc = np.zeros(chat.shape[0])
    for j in range(samples):
        acc += solve(inst, chat + sigma * zeta[j], audit)
    return xbar - acc / samples


def spo_plus_surrogate(ts_i: SampleTargets, chat: np.ndarray, inst,
                       audit: Optional[OracleAudit] = None) -> float:
    """Value of the convex surrogate whose subgradient is
    :func:`spo_plus_gradient`:
    ``max_x (c - 2 chat)^T x + 2 chat^T xbar - c^T xbar`` with targets in
    place of the empirical optimum."""
    xbar = ts_i.decision_mean()
    c_ref = ts_i.ref_cost
    x_adj = solve(inst, 2.0 * chat - c_ref, audit)
    return (-float(np.dot(2.0 * chat - c_ref, x_adj))
            + 2.0 * float(np.dot(chat, xbar)) - float(np.dot(c_ref, xbar)))


def loss_value(policy: TargetPolicy, ts_i: SampleTargets, chat: np.ndarray,
               inst, audit: Optional[OracleAudit] = None) -> float:
    """Training-policy loss of prediction ``chat`` on one sample: the mean
    over target pairs of ``c_target^T (x*(chat) - x_target)``.  One nominal
    solve (for ``x*(chat)``) per call."""
    k = ts_i.decisions.shape[0]
    if isinstance(policy, (Empirical, RobustOpt)) and k != 1:
        raise ValueError(f"{policy_label(policy)} targets must hold one pair")
    if isinstance(policy, (TopK, KNN)) and k > policy.k:
        raise ValueError("target list longer than the policy's k")
    xhat = solve(inst, chat, audit)
    gaps = ts_i.costs @ xhat - np.einsum("ij,ij->i", ts_i.costs, ts_i.decisions)
    return float(gaps.mean())


@dataclass
class AdamState:
    """Standard bias-corrected Adam."""

    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m1: Dict[str, np.ndarray] = field(default_factory=dict)
    m2: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: Dict[str, np.ndarray],
              grads: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """One in-place Adam update; returns ``params`` for convenience."""
    for name, g in grads.items():
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        if g.shape != params[name].shape:
            raise DimensionError(f"gradient shape mismatch for {name!r}")
    state.step += 1
    b1 = state.beta1
    b2 = state.beta2
    corr1 = 1.0 - b1 ** state.step
    corr2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        if g is None:
            continue
        if name not in state.m1:
            state.m1[name] = np.zeros_like(params[name])
            state.m2[name] = np.zeros_like(params[name])
        state.m1[name] = b1 * state.m1[name] + (1.0 - b1) * g
        state.m2[name] = b2 * state.m2[name] + (1.0 - b2) * (g * g)
        m_hat = state.m1[name] / corr1
        v_hat = state.m2[name] / corr2
        params[name] -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


@dataclass(frozen=True)
class TrainConfig:
    method: str                      # "spo+" | "pfyl" | "mse"
    policy: TargetPolicy
    epochs: int
    batch_size: int = 32
    lr: float = 0.01
    seed: int = 0
    shuffle: bool = True
    pfyl_samples: int = 1
    pfyl_sigma: float = 1.0
    use_bias: bool = False

    def __post_init__(self):
        if self.method not in ("spo+", "pfyl", "mse"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("bad epochs/batch_size")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "policy": policy_to_dict(self.policy),
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "seed": self.seed,
            "shuffle": self.shuffle,
            "pfyl_samples": self.pfyl_samples,
            "pfyl_sigma": self.pfyl_sigma,
            "use_bias": self.use_bias,
        }


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_regret_pct: float
    val_regret_pct: float


@dataclass(frozen=True)
class SolveCounts:
    precompute: int
    gradient: int
    evaluation: int

    def to_dict(self) -> dict:
        return {"precompute": self.precompute, "gradient": self.gradient,
                "evaluation": self.evaluation}


@dataclass(frozen=True)
class TrainedModel:
    predictor: LinearPredictor
    best_epoch: int
    history: List[EpochStats]
    audit: SolveCounts


def _normalized_regret_pct(regrets: np.ndarray, opt_values: np.ndarray) -> float:
    return 100.0 * float(np.sum(regrets)) / (float(np.sum(np.abs(opt_values))) + 1e-12)


def _split_eval(predictor: LinearPredictor, ds: Dataset, inst,
                opt_values: np.ndarray, audit: OracleAudit) -> float:
    chat = predictor.predict_batch(ds.features)
    regrets = np.empty(len(ds))
    for i in range(len(ds)):
        xhat = solve(inst, chat[i], audit)
        regrets[i] = float(np.dot(ds.costs[i], xhat)) - opt_values[i]
    pct = _normalized_regret_pct(regrets, opt_values)
    if not math.isfinite(pct):
        raise TrainingError("non-finite validation metric")
    return pct


def train(cfg: TrainConfig, train_ds: Dataset, val_ds: Dataset, inst,
          targets: Optional[TargetSet]) -> TrainedModel:
    """Deterministic minibatch training with best-epoch model selection.

    ``targets`` must be built with ``cfg.policy`` on ``train_ds``; it may be
    ``None`` only for the prediction-focused ``mse`` method, which uses no
    targets and performs no gradient-path solves.
    """
    t = len(train_ds)
    if t < 1 or len(val_ds) < 1:
        raise ValueError("empty dataset")
    if cfg.method == "mse":
        per_sample = None
    else:
        if targets is None:
            raise ValueError(f"method {cfg.method!r} requires a target set")
        if targets.policy != cfg.policy:
            raise ValueError("target set was built with a different policy")
        if len(targets) != t:
            raise ValueError("target set size does not match training set")
        per_sample = targets.per_sample

    n, m = train_ds.meta.n, train_ds.meta.m
    predictor = LinearPredictor.zeros(n, m, cfg.use_bias)
    params = {"theta": predictor.theta, "bias": predictor.bias}
    state = AdamState(lr=cfg.lr)

    grad_audit = OracleAudit()
    eval_audit = OracleAudit()
    shuffle_stream = RngStream(cfg.seed, STREAM_SHUFFLE)
    pfyl_stream = RngStream(cfg.seed, STREAM_PFYL)

    # Split optima are fixed; solve them once up front (evaluation path).
    def split_optima(ds):
        vals = np.empty(len(ds))
        for i in range(len(ds)):
            x = solve(inst, ds.costs[i], eval_audit)
            vals[i] = float(np.dot(ds.costs[i], x))
        return vals

    tr_opt_val = split_optima(train_ds)
    va_opt_val = split_optima(val_ds)

    if cfg.method != "mse":
        xbar = np.stack([st.decision_mean() for st in per_sample])
        ref = np.stack([st.ref_cost for st in per_sample])

    features = train_ds.features
    costs = train_ds.costs
    history: List[EpochStats] = []
    best_val = math.inf
    best_epoch = 0
    best_predictor = predictor.copy()

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_stream.permutation(t) if cfg.shuffle else np.arange(t)
        for lo in range(0, t, cfg.batch_size):
            batch = order[lo:lo + cfg.batch_size]
            g_theta = np.zeros((n, m))
            g_bias = np.zeros(n) if cfg.use_bias else None
            for i in batch:
                z = features[i]
                chat = params["theta"] @ z
                if cfg.use_bias:
                    chat = chat + params["bias"]
                if cfg.method == "spo+":
                    g = 2.0 * (xbar[i] - solve(inst, 2.0 * chat - ref[i], grad_audit))
                elif cfg.method == "pfyl":
                    zeta = pfyl_stream.normal((cfg.pfyl_samples, n))
                    acc = np.zeros(n)
                    for j in range(cfg.pfyl_samples):
                        acc += solve(inst, chat + cfg.pfyl_sigma * zeta[j], grad_audit)
                    g = xbar[i] - acc / cfg.pfyl_samples
                else:
                    g = mse_gradient(costs[i], chat)
                if not np.all(np.isfinite(g)):
                    raise TrainingError(
                        f"non-finite cost gradient at epoch {epoch}, sample {i}")
                g_theta += np.outer(g, z)
                if cfg.use_bias:
                    g_bias += g
            g_theta /= len(batch)
            if cfg.use_bias:
                g_bias /= len(batch)
            adam_step(state, params, {"theta": g_theta, "bias": g_bias})
        train_pct = _split_eval(predictor, train_ds, inst, tr_opt_val, eval_audit)
        val_pct = _split_eval(predictor, val_ds, inst, va_opt_val, eval_audit)
        history.append(EpochStats(epoch=epoch, train_regret_pct=train_pct,
                                  val_regret_pct=val_pct))
        if val_pct < best_val:
            best_val = val_pct
            best_epoch = epoch
            best_predictor = predictor.copy()

    audit = SolveCounts(
        precompute=0 if targets is None else targets.precompute_solves,
        gradient=grad_audit.solve_count,
        evaluation=eval_audit.solve_count,
    )
    return TrainedModel(predictor=best_predictor, best_epoch=best_epoch,
                        history=list(history), audit=audit)


def save_model(model: TrainedModel, cfg: TrainConfig, path) -> None:
    """Write a model file; floats use shortest round-trip decimal form, so
    reading the file back reproduces every parameter bit-for-bit."""
    predictor = model.predictor
    payload = {
        "config": cfg.to_dict(),
        "theta": predictor.theta.tolist(),
        "bias": None if predictor.bias is None else predictor.bias.tolist(),
        "best_epoch": model.best_epoch,
        "audit": model.audit.to_dict(),
        "history": [
            {"epoch": h.epoch, "train_regret_pct": h.train_regret_pct,
             "val_regret_pct": h.val_regret_pct}
            for h in model.history
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_model(path) -> tuple:
    """Returns ``(LinearPredictor, payload_dict)``."""
    with open(path) as fh:
        payload = json.load(fh)
    theta = np.array(payload["theta"], dtype=np.float64)
    bias = payload["bias"]
    predictor = LinearPredictor(
        theta=theta, bias=None if bias is None else np.array(bias, dtype=np.float64))
    return predictor, payload
