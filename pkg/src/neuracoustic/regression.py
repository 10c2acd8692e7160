"""Epsilon-insensitive support vector regression and cross-validation.

The dual is solved by sequential minimal optimization over the stacked
``2n`` variable vector ``(alpha, alpha*)`` The first index of each working
pair is the maximal KKT violator; the second maximizes the guaranteed
objective decrease among its violating partners. Features are always standardized on the training
rows first.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numba
import numpy as np

__all__ = [
    "FEATURES",
    "FeatureRow",
    "SVRHyperparams",
    "SVRModel",
    "CVReport",
    "feature_matrix",
    "train_svr",
    "predict",
    "kfold_cv",
    "grid_search",
    "table3_grid",
    "metrics",
    "read_feature_csv",
    "write_feature_csv",
    "read_scores_csv",
    "save_model",
    "load_model",
]

FEATURES = ("mr_nsim", "ft_nsim", "pta_db")
MODEL_FORMAT = "svr-model/1"


@dataclass(frozen=True)
class FeatureRow:
    profile_id: str
    mr_nsim: float
    ft_nsim: float
    pta_db: float
    score: Optional[float] = None

    def __post_init__(self):
        for name in FEATURES:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{self.profile_id}: {name} must be finite")
        if self.score is not None and not 0 <= self.score <= 1:
            raise ValueError(f"{self.profile_id}: score must lie in [0, 1]")


@dataclass(frozen=True)
class SVRHyperparams:
    """``gamma`` is ``'auto'``, ``'scale'`` or a positive number."""

    c: float = 1.0
    epsilon: float = 0.1
    gamma: Union[str, float] = "auto"
    kernel: str = "rbf"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("C must be positive")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")
        if self.kernel not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if isinstance(self.gamma, str):
            if self.gamma not in ("auto", "scale"):
                raise ValueError(f"unknown gamma rule {self.gamma!r}")
        elif not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def to_dict(self):
        return {"c": self.c, "epsilon": self.epsilon, "gamma": self.gamma, "kernel": self.kernel}


@dataclass
class SVRModel:
    support_vectors: np.ndarray  # standardized
    dual_coef: np.ndarray  # alpha - alpha*
    bias: float
    hyperparams: SVRHyperparams
    gamma_value: float
    features: Tuple[str, ...]
    feature_mode: str
    mean: np.ndarray
    scale: np.ndarray
    kkt_violation: float
    n_iter: int

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]


@dataclass
class CVReport:
    fold_mse: List[float]
    fold_r2: List[float]
    mse: float
    r2: float
    seed: int
    folds: List[List[str]] = field(default_factory=list)
    predictions: dict = field(default_factory=dict)

    def to_dict(self):
        return {"fold_mse": self.fold_mse, "fold_r2": self.fold_r2, "mse": self.mse, "r2": self.r2,
                "seed": self.seed, "folds": self.folds, "predictions": self.predictions}


def feature_matrix(rows: Sequence[FeatureRow], features: Sequence[str] = FEATURES,
                   mode: str = "set") -> np.ndarray:
    """Raw feature matrix; ``mode='product'`` multiplies the selected features
    into a single column."""
    features = tuple(features)
    if not features:
        raise ValueError("no features selected")
    unknown = set(features) - set(FEATURES)
    if unknown:
        raise ValueError(f"unknown features {sorted(unknown)}")
    X = np.array([[getattr(r, f) for f in features] for r in rows], dtype=float)
    if mode == "product":
        return X.prod(axis=1, keepdims=True)
    if mode != "set":
        raise ValueError(f"unknown feature mode {mode!r}")
    return X


def _kernel(A, B, kernel, gamma):
    if kernel == "linear":
        return A @ B.T
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _gamma_value(hp: SVRHyperparams, Z: np.ndarray) -> float:
    if hp.gamma == "auto":
        return 1.0 / Z.shape[1]
    if hp.gamma == "scale":
        v = float(Z.var())
        return 1.0 / (Z.shape[1] * v) if v > 0 else 1.0
    return float(hp.gamma)


@numba.njit(cache=True)
def _smo_loop(Q, y, p, C, tol, max_iter):
    m = y.size
    qd = np.empty(m)
    for t in range(m):
        qd[t] = Q[t, t]
    a = np.zeros(m)
    G = p.copy()
    tau = 1e-12
    it = 0
    gap = np.inf
    while it < max_iter:
        # i: maximal violator in the "up" set; gap: max violation over all pairs
        i = -1
        g_max = -np.inf
        g_min = np.inf
        for t in range(m):
            yg = -y[t] * G[t]
            if (y[t] > 0 and a[t] < C) or (y[t] < 0 and a[t] > 0):
                if yg > g_max:
                    g_max = yg
                    i = t
            if (y[t] > 0 and a[t] > 0) or (y[t] < 0 and a[t] < C):
                if yg < g_min:
                    g_min = yg
        if i < 0 or g_min == np.inf:
            gap = 0.0
            break
        gap = g_max - g_min
        if gap < tol:
            break
        # j: largest guaranteed objective decrease among violators paired with i
        j = -1
        best = np.inf
        for t in range(m):
            if (y[t] > 0 and a[t] > 0) or (y[t] < 0 and a[t] < C):
                b = g_max + y[t] * G[t]
                if b > 0:
                    quad = qd[i] + qd[t] - 2.0 * y[i] * y[t] * Q[i, t]
                    if quad <= 0:
                        quad = tau
                    gain = -(b * b) / quad
                    if gain <= best:
                        best = gain
                        j = t
        it += 1
        ai = a[i]
        aj = a[j]
        if y[i] != y[j]:
            quad = qd[i] + qd[j] + 2.0 * Q[i, j]
            if quad <= 0:
                quad = tau
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            elif a[j] > C:
                a[j] = C
                a[i] = C + diff
        else:
            quad = qd[i] + qd[j] - 2.0 * Q[i, j]
            if quad <= 0:
                quad = tau
            delta = (G[i] - G[j]) / quad
            s = ai + aj
            a[i] -= delta
            a[j] += delta
            if s > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = s - C
            elif a[j] < 0:
                a[j] = 0.0
                a[i] = s
            if s > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = s - C
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = s
        dai = a[i] - ai
        daj = a[j] - aj
        for t in range(m):
            G[t] += Q[t, i] * dai + Q[t, j] * daj
    return a, G, gap, it


def _smo(K: np.ndarray, z: np.ndarray, C: float, eps: float, tol: float, max_iter: int):
    n = z.size
    y = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([eps - z, eps + z])
    idx = np.concatenate([np.arange(n), np.arange(n)])
    Q = np.ascontiguousarray((y[:, None] * y[None, :]) * K[np.ix_(idx, idx)])
    a, G, gap, it = _smo_loop(Q, y, p, float(C), float(tol), int(max_iter))

    # threshold from free variables, else midpoint of the feasible interval
    yG = y * G
    at_up, at_low = a >= C, a <= 0
    free = ~(at_up | at_low)
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub_mask = (at_up & (y < 0)) | (at_low & (y > 0))
        lb_mask = (at_up & (y > 0)) | (at_low & (y < 0))
        ub = yG[ub_mask].min() if ub_mask.any() else math.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -math.inf
        rho = float((ub + lb) / 2)
    return a[:n] - a[n:], -rho, float(gap), int(it)


def train_svr(rows: Sequence[FeatureRow], features: Sequence[str], hp: SVRHyperparams,
              feature_mode: str = "set", tol: float = 1e-3, max_iter: int = 100_000) -> SVRModel:
    """Fit an epsilon-SVR to ``rows[i].score``.

    Raises
    ------
    ValueError
        Fewer than two rows, a missing score, or a zero-variance feature.
    """
    if len(rows) < 2:
        raise ValueError("need at least two training rows")
    if any(r.score is None for r in rows):
        raise ValueError("every training row needs a score")
    X = feature_matrix(rows, features, feature_mode)
    names = tuple(features) if feature_mode == "set" else ("*".join(features),)
    mean, scale = X.mean(axis=0), X.std(axis=0)
    for name, s in zip(names, scale):
        if s == 0:
            raise ValueError(f"feature {name!r} has zero variance")
    Z = (X - mean) / scale
    y = np.array([r.score for r in rows], dtype=float)
    gamma = _gamma_value(hp, Z)
    K = _kernel(Z, Z, hp.kernel, gamma)
    coef, bias, gap, it = _smo(K, y, hp.c, hp.epsilon, tol, max_iter)
    sv = np.abs(coef) > 0
    return SVRModel(Z[sv], coef[sv], bias, hp, gamma, tuple(features), feature_mode, mean, scale, gap, it)


def _decision(model: SVRModel, X: np.ndarray) -> np.ndarray:
    Z = (X - model.mean) / model.scale
    if model.support_vectors.shape[0] == 0:
        return np.full(Z.shape[0], model.bias)
    K = _kernel(Z, model.support_vectors, model.hyperparams.kernel, model.gamma_value)
    return K @ model.dual_coef + model.bias


def predict(model: SVRModel, x) -> Union[float, np.ndarray]:
    """SVR output for a raw feature vector (or a 2-D batch of them)."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.mean.size:
        raise ValueError(f"expected {model.mean.size} features, got {X.shape[1]}")
    out = _decision(model, X)
    return float(out[0]) if single else out


def predict_rows(model: SVRModel, rows: Sequence[FeatureRow]) -> np.ndarray:
    return _decision(model, feature_matrix(rows, model.features, model.feature_mode))


def metrics(y_true, y_pred) -> Tuple[float, float]:
    """Mean squared error and coefficient of determination."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.size < 2:
        raise ValueError("need two equal-length sequences of at least 2 values")
    res = y_true - y_pred
    mse = float(np.mean(res * res))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0:
        raise ValueError("r2 undefined for zero-variance truth")
    return mse, 1.0 - float(np.sum(res * res)) / ss_tot


def kfold_cv(rows: Sequence[FeatureRow], features: Sequence[str], hp: SVRHyperparams, k: int = 3,
             seed: int = 0, feature_mode: str = "set") -> CVReport:
    """Seeded k-fold cross-validation with pooled held-out metrics.

    Rows are sorted by ``profile_id`` before the seeded shuffle, so the fold
    assignment does not depend on input order.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > len(rows):
        raise ValueError(f"k={k} exceeds the {len(rows)} rows")
    rows = sorted(rows, key=lambda r: r.profile_id)
    perm = np.random.default_rng(seed).permutation(len(rows))
    folds = np.array_split(perm, k)
    y = np.array([r.score for r in rows], dtype=float)
    pred = np.empty(len(rows))
    fold_mse, fold_r2 = [], []
    for held in folds:
        train = np.setdiff1d(perm, held)
        model = train_svr([rows[i] for i in train], features, hp, feature_mode)
        pred[held] = predict_rows(model, [rows[i] for i in held])
        res = y[held] - pred[held]
        fold_mse.append(float(np.mean(res * res)))
        fold_r2.append(metrics(y[held], pred[held])[1] if held.size > 1 and np.ptp(y[held]) > 0
                       else float("nan"))
    mse, r2 = metrics(y, pred)
    return CVReport(fold_mse, fold_r2, mse, r2, seed,
                    [[rows[i].profile_id for i in f] for f in folds],
                    {rows[i].profile_id: float(pred[i]) for i in range(len(rows))})


def grid_search(rows, features, grid: Sequence[SVRHyperparams], k: int = 3, seed: int = 0,
                feature_mode: str = "set"):
    """Best hyperparameters by pooled CV MSE.

    Ties go to the smaller C, then the larger epsilon, then grid order.
    """
    if not grid:
        raise ValueError("empty hyperparameter grid")
    scored = []
    for pos, hp in enumerate(grid):
        rep = kfold_cv(rows, features, hp, k, seed, feature_mode)
        scored.append(((rep.mse, hp.c, -hp.epsilon, pos), hp, rep))
    _, hp, rep = min(scored, key=lambda s: s[0])
    return hp, rep


def table3_grid() -> List[SVRHyperparams]:
    """Neighbourhood of the reported best settings: C, epsilon, gamma rule, kernel."""
    return [SVRHyperparams(c, e, g, kern)
            for kern in ("rbf", "linear")
            for g in ("auto", "scale")
            for c in (0.25, 1.0, 2.5, 10.0)
            for e in (0.05, 0.075, 0.1)]


def read_feature_csv(path) -> List[FeatureRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            score = rec.get("score", "")
            rows.append(FeatureRow(rec["profile_id"], float(rec["mr_nsim"]), float(rec["ft_nsim"]),
                                   float(rec["pta_db"]), float(score) if score not in ("", None) else None))
    return rows


def write_feature_csv(path, rows: Sequence[FeatureRow]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["profile_id", "mr_nsim", "ft_nsim", "pta_db", "score"])
        for r in rows:
            w.writerow([r.profile_id, repr(r.mr_nsim), repr(r.ft_nsim), repr(r.pta_db),
                        "" if r.score is None else repr(r.score)])


def read_scores_csv(path) -> dict:
    """``profile_id,score`` table as a dict."""
    with open(path, newline="", encoding="utf-8") as fh:
        return {rec["profile_id"]: float(rec["score"]) for rec in csv.DictReader(fh)}


def save_model(model: SVRModel, path):
    doc = {
        "fmt": MODEL_FORMAT,
        "hyperparams": model.hyperparams.to_dict(),
        "gamma_value": model.gamma_value,
        "features": list(model.features),
        "feature_mode": model.feature_mode,
        "mean": model.mean.tolist(),
        "scale": model.scale.tolist(),
        "support_vectors": model.support_vectors.tolist(),
        "dual_coef": model.dual_coef.tolist(),
        "bias": model.bias,
        "kkt_violation": model.kkt_violation,
        "n_iter": model.n_iter,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> SVRModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("fmt") != MODEL_FORMAT:
        raise ValueError(f"{path}: unknown model format {doc.get('fmt')!r}")
    n_feat = len(doc["mean"])
    return SVRModel(
        np.array(doc["support_vectors"], dtype=float).reshape(-1, n_feat),
        np.array(doc["dual_coef"], dtype=float),
        float(doc["bias"]),
        SVRHyperparams(**doc["hyperparams"]),
        float(doc["gamma_value"]),
        tuple(doc["features"]),
        doc["feature_mode"],
        np.array(doc["mean"], dtype=float),
        np.array(doc["scale"], dtype=float),
        float(doc["kkt_violation"]),
        int(doc["n_iter"]),
    )
