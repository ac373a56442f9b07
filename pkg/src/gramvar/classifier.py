"""One-vs-rest linear SVM with deterministic training.

The solver is a seeded Pegasos-style stochastic subgradient descent on the
L2-regularized hinge loss. An own implementation, not a library solver:
unmasking needs bit-reproducible weights and per-class feature rankings,
which off-the-shelf SVMs do not guarantee across versions.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

TRAIN_FRACTION = 0.8
DEFAULT_C = 1.0
DEFAULT_EPOCHS = 20


class ClassifierError(Exception):
    """Fatal problem while splitting, training, or evaluating."""


@dataclass(frozen=True)
class SplitSpec:
    """Seeded stratified train/test partition, reused by every experiment."""

    seed: int
    train_fraction: float
    train: tuple[int, ...]
    test: tuple[int, ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "train_fraction": self.train_fraction,
                "train": list(self.train),
                "test": list(self.test),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SplitSpec":
        d = json.loads(text)
        return cls(
            seed=int(d["seed"]),
            train_fraction=float(d["train_fraction"]),
            train=tuple(d["train"]),
            test=tuple(d["test"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SplitSpec":
        path = Path(path)
        if not path.is_file():
            raise ClassifierError(f"split file not found: {path}")
        return cls.from_json(path.read_text(encoding="utf-8"))

    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def make_split(
    labels: Sequence[str],
    seed: int,
    train_fraction: float = TRAIN_FRACTION,
) -> SplitSpec:
    """Stratified split: per class, a seeded shuffle then an 80/20 cut.

    Both sides keep at least one sample of every class, so a class with a
    single sample cannot be split and is fatal.
    """
    if not labels:
        raise ClassifierError("no samples to split")
    by_class: dict[str, list[int]] = {}
    for i, lbl in enumerate(labels):
        by_class.setdefault(lbl, []).append(i)
    rng = np.random.default_rng(seed)
    train: list[int] = []
    test: list[int] = []
    for lbl in sorted(by_class):
        idx = by_class[lbl]
        if len(idx) < 2:
            raise ClassifierError(f"class {lbl!r} has one sample, cannot stratify")
        order = rng.permutation(len(idx))
        n_train = int(round(train_fraction * len(idx)))
        n_train = min(max(n_train, 1), len(idx) - 1)
        shuffled = [idx[j] for j in order]
        train.extend(shuffled[:n_train])
        test.extend(shuffled[n_train:])
    return SplitSpec(
        seed=seed,
        train_fraction=train_fraction,
        train=tuple(sorted(train)),
        test=tuple(sorted(test)),
    )


@dataclass
class LinearModel:
    """One-vs-rest linear classifier: decision(x, c) = w_c · x + b_c."""

    classes: list[str]
    weights: np.ndarray  # classes x features
    biases: np.ndarray
    scale: np.ndarray  # per-feature max-abs, fit on train only
    feature_ids: list[int]
    config: dict = field(default_factory=dict)

    def decision(self, X: np.ndarray) -> np.ndarray:
        return (X / self.scale) @ self.weights.T + self.biases

    def predict(self, X: np.ndarray) -> list[str]:
        scores = self.decision(np.atleast_2d(X))
        # argmax takes the first max, and classes are sorted: ties go to
        # the lowest class label
        return [self.classes[i] for i in np.argmax(scores, axis=1)]

    def save(self, prefix: str | Path) -> None:
        prefix = Path(prefix)
        np.save(prefix.with_suffix(".weights.npy"), self.weights)
        np.save(prefix.with_suffix(".biases.npy"), self.biases)
        np.save(prefix.with_suffix(".scale.npy"), self.scale)
        prefix.with_suffix(".json").write_text(
            json.dumps(
                {
                    "classes": self.classes,
                    "feature_ids": self.feature_ids,
                    "config": self.config,
                },
                sort_keys=True,
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, prefix: str | Path) -> "LinearModel":
        prefix = Path(prefix)
        sidecar = prefix.with_suffix(".json")
        if not sidecar.is_file():
            raise ClassifierError(f"model not found at {prefix}")
        d = json.loads(sidecar.read_text(encoding="utf-8"))
        return cls(
            classes=d["classes"],
            weights=np.load(prefix.with_suffix(".weights.npy")),
            biases=np.load(prefix.with_suffix(".biases.npy")),
            scale=np.load(prefix.with_suffix(".scale.npy")),
            feature_ids=d["feature_ids"],
            config=d["config"],
        )


def train(
    X: np.ndarray,
    y: Sequence[str],
    split: SplitSpec,
    C: float = DEFAULT_C,
    epochs: int = DEFAULT_EPOCHS,
    seed: int = 0,
    feature_ids: Sequence[int] | None = None,
) -> LinearModel:
    """Train one-vs-rest linear SVMs on the split's training rows.

    Per class, hinge loss with L2 penalty lambda = 1/(C n) is minimized by
    stochastic subgradient steps eta_t = 1/(lambda t); the bias stays
    unregularized. All class subproblems share the same seeded per-epoch
    shuffle orders, so retraining is bit-reproducible.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != len(y):
        raise ClassifierError(f"feature rows {X.shape[0]} != labels {len(y)}")
    train_idx = np.array(split.train, dtype=int)
    Xt = X[train_idx]
    if not np.all(np.isfinite(Xt)):
        raise ClassifierError("non-finite feature values")
    yt = [y[i] for i in train_idx]
    classes = sorted(set(yt))
    if len(classes) < 2:
        raise ClassifierError("training needs at least 2 classes")

    # max-abs scaling fit on train only; preserves zeros
    scale = np.max(np.abs(Xt), axis=0)
    scale[scale == 0.0] = 1.0
    Xs = Xt / scale

    n, d = Xs.shape
    lam = 1.0 / (C * n)
    rng = np.random.default_rng(seed)
    orders = [rng.permutation(n) for _ in range(epochs)]

    weights = np.zeros((len(classes), d))
    biases = np.zeros(len(classes))
    for ci, cls_label in enumerate(classes):
        target = np.where(np.array(yt) == cls_label, 1.0, -1.0)
        w = np.zeros(d)
        b = 0.0
        t = 0
        for order in orders:
            for i in order:
                t += 1
                eta = 1.0 / (lam * t)
                w *= 1.0 - eta * lam
                if target[i] * (np.dot(w, Xs[i]) + b) < 1.0:
                    w += eta * target[i] * Xs[i]
                    b += eta * target[i]
        weights[ci] = w
        biases[ci] = b

    return LinearModel(
        classes=classes,
        weights=weights,
        biases=biases,
        scale=scale,
        feature_ids=list(feature_ids) if feature_ids is not None else list(range(d)),
        config={"C": C, "epochs": epochs, "seed": seed, "scaling": "maxabs"},
    )


@dataclass
class Metrics:
    """Per-class precision/recall/F plus confusion; rows are true labels."""

    classes: list[str]
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f_score: np.ndarray
    support: np.ndarray

    @classmethod
    def from_confusion(cls, classes: Sequence[str], confusion: np.ndarray) -> "Metrics":
        confusion = np.asarray(confusion, dtype=np.int64)
        tp = np.diag(confusion).astype(np.float64)
        support = confusion.sum(axis=1).astype(np.float64)
        predicted = confusion.sum(axis=0).astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            precision = np.where(predicted > 0, tp / predicted, 0.0)
            recall = np.where(support > 0, tp / support, 0.0)
            pr = precision + recall
            f_score = np.where(pr > 0, 2 * precision * recall / pr, 0.0)
        return cls(list(classes), confusion, precision, recall, f_score, support)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion)) / self.total if self.total else 0.0

    def _weighted(self, values: np.ndarray) -> float:
        total = self.support.sum()
        return float(np.dot(values, self.support) / total) if total else 0.0

    @property
    def weighted_precision(self) -> float:
        return self._weighted(self.precision)

    @property
    def weighted_recall(self) -> float:
        return self._weighted(self.recall)

    @property
    def weighted_f(self) -> float:
        return self._weighted(self.f_score)

    def to_csv_rows(self) -> list[list[str]]:
        rows = [["class", "precision", "recall", "f_score", "support"]]
        for i, c in enumerate(self.classes):
            rows.append(
                [
                    c,
                    f"{self.precision[i]:.6f}",
                    f"{self.recall[i]:.6f}",
                    f"{self.f_score[i]:.6f}",
                    str(int(self.support[i])),
                ]
            )
        rows.append(
            [
                "weighted_avg",
                f"{self.weighted_precision:.6f}",
                f"{self.weighted_recall:.6f}",
                f"{self.weighted_f:.6f}",
                str(int(self.support.sum())),
            ]
        )
        return rows

    def to_json_dict(self) -> dict:
        return {
            "classes": self.classes,
            "confusion": self.confusion.tolist(),
            "weighted_precision": round(self.weighted_precision, 12),
            "weighted_recall": round(self.weighted_recall, 12),
            "weighted_f": round(self.weighted_f, 12),
            "accuracy": round(self.accuracy, 12),
        }


def evaluate(model: LinearModel, X_test: np.ndarray, y_test: Sequence[str]) -> Metrics:
    """Confusion and derived metrics on held-out rows."""
    X_test = np.atleast_2d(np.asarray(X_test, dtype=np.float64))
    if X_test.shape[0] == 0 or len(y_test) == 0:
        raise ClassifierError("empty test set")
    if X_test.shape[0] != len(y_test):
        raise ClassifierError("test rows and labels differ in length")
    labels = sorted(set(model.classes) | set(y_test))
    index = {c: i for i, c in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for true, pred in zip(y_test, model.predict(X_test)):
        confusion[index[true], index[pred]] += 1
    return Metrics.from_confusion(labels, confusion)


def top_features(model: LinearModel, cls_label: str, k: int) -> list[int]:
    """The k feature ids with the largest positive weights for a class.

    Sorted by descending weight, ties by ascending feature id; features
    with non-positive weight never qualify, so fewer than k ids may return.
    """
    try:
        ci = model.classes.index(cls_label)
    except ValueError:
        raise ClassifierError(f"unknown class {cls_label!r}") from None
    w = model.weights[ci]
    pairs = [(fid, w[j]) for j, fid in enumerate(model.feature_ids) if w[j] > 0.0]
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return [fid for fid, _ in pairs[: max(k, 0)]]
