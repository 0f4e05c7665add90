"""Linear soft-margin SVM on segment features, holdout splits and evaluation.

Condition label 1 is read as *Damaged* and label 0 as *Healthy*; confusion
matrices list Damaged first in both rows (truth) and columns (prediction).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .features import column_scale

CLASS_NAMES = ("Damaged", "Healthy")
FAKE_DYNAMICS_ACCURACY = 0.99

# fractions reproducing the 615 / 1845 test-set sizes on a 787/788/1000/1000 pool
HOLDOUT_FRACTIONS = {">15%": 0.172, ">50%": 0.516}


@dataclass(frozen=True)
class Item:
    """One labelled feature vector with its provenance."""

    features: np.ndarray
    label: int
    source: str = "real"
    segment_id: str = ""


@dataclass(frozen=True)
class SvmModel:
    weights: np.ndarray
    bias: float
    C: float
    scaler_mean: np.ndarray
    scaler_std: np.ndarray
    epochs: int = 200
    seed: int = 0

    def decision_function(self, X) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.scaler_mean) / self.scaler_std
        return Z @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "C": self.C,
            "scaler_mean": self.scaler_mean.tolist(),
            "scaler_std": self.scaler_std.tolist(),
            "epochs": self.epochs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d) -> "SvmModel":
        return cls(
            np.asarray(d["weights"], dtype=np.float64),
            float(d["bias"]),
            float(d["C"]),
            np.asarray(d["scaler_mean"], dtype=np.float64),
            np.asarray(d["scaler_std"], dtype=np.float64),
            int(d["epochs"]),
            int(d["seed"]),
        )


@dataclass
class EvalReport:
    confusion: np.ndarray
    accuracy: float
    split_fraction: float
    n_test: int
    fake_dynamics_flag: bool
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "classes": list(CLASS_NAMES),
            "accuracy": self.accuracy,
            "n_test": self.n_test,
            "split_fraction": self.split_fraction,
            "flag": self.fake_dynamics_flag,
            "seed": self.seed,
            **self.extra,
        }

    def write(self, json_path, csv_path=None) -> None:
        with open(json_path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if csv_path is not None:
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["true\\predicted", *CLASS_NAMES])
                for name, row in zip(CLASS_NAMES, self.confusion):
                    w.writerow([name, *(int(v) for v in row)])


def _as_xy(items):
    if not items:
        raise ValueError("no items")
    X = np.stack([np.asarray(it.features, dtype=np.float64) for it in items])
    y = np.array([int(it.label) for it in items], dtype=np.int64)
    return X, y


def objective(w, b, Z, y, lam) -> float:
    """``lam/2 * (|w|^2 + b^2) + mean hinge`` with labels mapped to +-1."""
    s = 2.0 * y - 1.0
    hinge = np.maximum(0.0, 1.0 - s * (Z @ w + b))
    return 0.5 * lam * (w @ w + b * b) + hinge.mean()


def pegasos(Z, y, lam: float, epochs: int, rng) -> tuple[np.ndarray, float]:
    """Stochastic subgradient descent with step ``1/(lam t)`` and a suffix average.

    The bias rides along as a constant input column and is regularized with
    the weights.  The returned solution averages the iterates of the second
    half of training.
    """
    n, F = Z.shape
    A = np.hstack([Z, np.ones((n, 1))])
    s = 2.0 * y - 1.0
    w = np.zeros(F + 1)
    acc = np.zeros(F + 1)
    n_acc = 0
    radius = 1.0 / math.sqrt(lam)
    t = 0
    half = (epochs * n) // 2
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            margin = s[i] * (A[i] @ w)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += (eta * s[i]) * A[i]
            norm = math.sqrt(w @ w)
            if norm > radius:
                w *= radius / norm
            if t > half:
                acc += w
                n_acc += 1
    w = acc / max(n_acc, 1)
    return w[:-1].copy(), float(w[-1])


def train_svm(items, C: float = 1.0, epochs: int = 200, seed: int = 0) -> SvmModel:
    X, y = _as_xy(items)
    if set(np.unique(y)) != {0, 1}:
        raise ValueError(f"both labels are required for training, got {sorted(set(y.tolist()))}")
    if not C > 0:
        raise ValueError("C must be > 0")
    mean, std = column_scale(X)
    Z = (X - mean) / std
    lam = 1.0 / (C * len(y))
    w, b = pegasos(Z, y, lam, epochs, np.random.default_rng(seed))
    return SvmModel(w, b, float(C), mean, std, epochs, seed)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def holdout_split(items, fraction: float, seed: int = 0):
    """Stratified split by ``(source, label)``; each stratum gives ``round(fraction * size)`` test items."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    strata: dict = {}
    for i, it in enumerate(items):
        strata.setdefault((it.source, int(it.label)), []).append(i)
    rng = np.random.default_rng(seed)
    test_idx = []
    for key in sorted(strata):
        idx = strata[key]
        k = _round_half_up(fraction * len(idx))
        if k == 0 or k == len(idx):
            raise ValueError(f"stratum {key} with {len(idx)} items is too small for fraction {fraction}")
        test_idx += [idx[j] for j in rng.permutation(len(idx))[:k]]
    chosen = set(test_idx)
    train = [it for i, it in enumerate(items) if i not in chosen]
    test = [items[i] for i in sorted(chosen)]
    return train, test


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    """Rows true, columns predicted, Damaged (1) before Healthy (0)."""
    cm = np.zeros((2, 2), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        cm[1 - int(t), 1 - int(p)] += 1
    return cm


def evaluate(model: SvmModel, items, split_fraction: float = 1.0) -> EvalReport:
    X, y = _as_xy(items)
    cm = confusion_matrix(y, model.predict(X))
    acc = float(np.trace(cm) / len(y))
    return EvalReport(cm, acc, float(split_fraction), int(len(y)), acc >= FAKE_DYNAMICS_ACCURACY, model.seed)


def classical_baseline(items, fraction: float, seed: int = 0, C: float = 1.0, epochs: int = 200) -> EvalReport:
    """Train and test on real features alone, with no generated data involved."""
    sources = {it.source for it in items}
    if len({(it.source, int(it.label)) for it in items}) < 2:
        raise ValueError("stratification needs at least two (source, label) strata")
    train, test = holdout_split(items, fraction, seed)
    model = train_svm(train, C=C, epochs=epochs, seed=seed)
    report = evaluate(model, test, split_fraction=fraction)
    report.extra["sources"] = sorted(sources)
    return report
