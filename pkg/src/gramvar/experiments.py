"""The four dialect analyses: granularity runs, node scans, unmasking,
and error-similarity correlation.

Every experiment consumes the same persisted train/test split; result
objects carry the split hash so downstream artifacts can assert they were
produced from identical partitions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import spearmanr

from .classifier import (
    ClassifierError,
    DEFAULT_C,
    DEFAULT_EPOCHS,
    LinearModel,
    Metrics,
    SplitSpec,
    evaluate,
    top_features,
    train,
)
from .grammar import Grammar, Node, all_nodes, filter_by_node
from .matcher import FeatureMatrix

GRANULARITIES = ("region", "country", "local")


class ExperimentError(Exception):
    """Fatal problem while driving an experiment."""


def _labels(fm: FeatureMatrix, granularity: str) -> list[str]:
    if granularity not in fm.labels:
        raise ExperimentError(f"unknown granularity {granularity!r}")
    y = fm.labels[granularity]
    if any(not lbl for lbl in y):
        raise ExperimentError(f"missing {granularity} label")
    return y


def _train_eval(
    X: np.ndarray,
    y: Sequence[str],
    split: SplitSpec,
    feature_ids: Sequence[int],
    C: float,
    epochs: int,
    seed: int,
) -> tuple[LinearModel, Metrics]:
    model = train(X, y, split, C=C, epochs=epochs, seed=seed, feature_ids=feature_ids)
    test_idx = np.array(split.test, dtype=int)
    metrics = evaluate(model, X[test_idx], [y[i] for i in test_idx])
    return model, metrics


def _sub_split(split: SplitSpec, rows: Sequence[int]) -> SplitSpec:
    """Restrict a split to a row subset, re-indexed to subset positions."""
    pos = {row: p for p, row in enumerate(rows)}
    return SplitSpec(
        seed=split.seed,
        train_fraction=split.train_fraction,
        train=tuple(pos[i] for i in split.train if i in pos),
        test=tuple(pos[i] for i in split.test if i in pos),
    )


@dataclass
class GranularityRun:
    granularity: str
    metrics: dict[str, Metrics]  # model name -> metrics
    skipped: dict[str, str]  # model name -> reason
    split_hash: str


def run_granularity(
    fm: FeatureMatrix,
    granularity: str,
    split: SplitSpec,
    *,
    C: float = DEFAULT_C,
    epochs: int = DEFAULT_EPOCHS,
    seed: int = 0,
) -> GranularityRun:
    """Train and evaluate at one spatial granularity.

    Region and country run a single model over all samples. Local runs one
    model per region, classifying that region's areas on the region's rows
    of the shared split; regions whose training rows collapse to a single
    area are reported as skipped rather than trained.
    """
    if granularity not in GRANULARITIES:
        raise ExperimentError(f"unknown granularity {granularity!r}")
    metrics: dict[str, Metrics] = {}
    skipped: dict[str, str] = {}
    if granularity in ("region", "country"):
        y = _labels(fm, granularity)
        _, m = _train_eval(
            fm.matrix, y, split, fm.construction_ids, C, epochs, seed
        )
        metrics[granularity] = m
    else:
        regions = _labels(fm, "region")
        areas = _labels(fm, "area")
        for region in sorted(set(regions)):
            rows = [i for i, r in enumerate(regions) if r == region]
            sub = _sub_split(split, rows)
            y_local = [areas[i] for i in rows]
            if len({y_local[i] for i in sub.train}) < 2:
                skipped[region] = "single area in training rows"
                continue
            if not sub.test:
                skipped[region] = "no test rows"
                continue
            X_local = fm.matrix[rows]
            _, m = _train_eval(
                X_local, y_local, sub, fm.construction_ids, C, epochs, seed
            )
            metrics[region] = m
    return GranularityRun(granularity, metrics, skipped, split.hash())


@dataclass
class NodeResult:
    node: Node
    stage: str
    n_constructions: int
    degenerate: bool
    metrics: Metrics

    @property
    def weighted_f(self) -> float:
        return self.metrics.weighted_f


@dataclass
class NodeScanResult:
    granularity: str
    stage: str
    full: Metrics
    majority_share: float
    nodes: list[NodeResult]
    split_hash: str


def node_scan(
    fm: FeatureMatrix,
    granularity: str,
    split: SplitSpec,
    grammar: Grammar,
    *,
    stage: str = "",
    C: float = DEFAULT_C,
    epochs: int = DEFAULT_EPOCHS,
    seed: int = 0,
    threads: int = 1,
) -> NodeScanResult:
    """Retrain on each micro- and macro-cluster's columns, same split.

    The full-grammar model and the largest-class share give the two
    baselines. A node whose training columns are entirely zero still
    trains (the model collapses to a constant prediction) but is flagged
    degenerate.
    """
    y = _labels(fm, granularity)
    column = {cid: k for k, cid in enumerate(fm.construction_ids)}
    missing = [c.id for c in grammar.constructions if c.id not in column]
    if missing:
        raise ExperimentError(
            f"grammar constructions absent from matrix: {missing[:5]}"
        )
    _, full = _train_eval(fm.matrix, y, split, fm.construction_ids, C, epochs, seed)
    test_labels = [y[i] for i in split.test]
    counts: dict[str, int] = {}
    for lbl in test_labels:
        counts[lbl] = counts.get(lbl, 0) + 1
    majority_share = max(counts.values()) / len(test_labels)

    train_rows = np.array(split.train, dtype=int)

    def one(node: Node) -> NodeResult:
        sub = filter_by_node(grammar, node)
        cols = sorted(column[c.id] for c in sub.constructions)
        ids = [fm.construction_ids[c] for c in cols]
        X_node = fm.matrix[:, cols]
        degenerate = not np.any(X_node[train_rows])
        _, m = _train_eval(X_node, y, split, ids, C, epochs, seed)
        return NodeResult(node, stage, len(sub), degenerate, m)

    nodes = all_nodes(grammar)
    if threads > 1 and len(nodes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, nodes))
    else:
        results = [one(n) for n in nodes]
    return NodeScanResult(granularity, stage, full, majority_share, results, split.hash())


@dataclass
class UnmaskRound:
    round: int
    weighted_f: float
    per_class_f: dict[str, float]
    removed: tuple[int, ...]  # in pick order, after this round's evaluation


@dataclass
class UnmaskingCurve:
    granularity: str
    remove_per_class: int
    classes: list[str]
    rounds: list[UnmaskRound]
    split_hash: str

    def cumulative_removed(self) -> list[int]:
        out, total = [], 0
        for r in self.rounds:
            total += len(r.removed)
            out.append(total)
        return out


def default_removal_rate(n_features: int, rounds: int, n_classes: int) -> int:
    """Per class per round, sized so the full run prunes about a quarter."""
    if rounds <= 0 or n_classes <= 0:
        return 1
    return max(1, math.ceil(0.25 * n_features / (rounds * n_classes)))


def unmask(
    fm: FeatureMatrix,
    granularity: str,
    split: SplitSpec,
    rounds: int = 500,
    remove_per_class_per_round: int | None = None,
    *,
    C: float = DEFAULT_C,
    epochs: int = DEFAULT_EPOCHS,
    seed: int = 0,
) -> UnmaskingCurve:
    """Iteratively evaluate, then prune each class's strongest features.

    Round r is evaluated with r rounds of removals applied; its record
    lists the ids removed after its own evaluation (empty on the final
    round). Per round, each class claims its top positive-weight features
    in weight order, skipping ids another class already claimed that
    round, so rounds remove exactly classes x rate while positives last.
    The curve ends early once no class has a positive feature left.
    """
    if rounds < 0:
        raise ExperimentError("rounds must be non-negative")
    y = _labels(fm, granularity)
    column = {cid: k for k, cid in enumerate(fm.construction_ids)}
    active: list[int] = list(fm.construction_ids)
    n_classes = len({y[i] for i in split.train})
    k = (
        remove_per_class_per_round
        if remove_per_class_per_round is not None
        else default_removal_rate(len(active), rounds, n_classes)
    )
    if rounds > 0 and k < 1:
        raise ExperimentError("remove_per_class_per_round must be positive")

    out: list[UnmaskRound] = []
    classes: list[str] = []
    for r in range(rounds + 1):
        if not active:
            break
        cols = [column[fid] for fid in active]
        model, metrics = _train_eval(
            fm.matrix[:, cols], y, split, active, C, epochs, seed
        )
        classes = model.classes
        per_class_f = {
            c: float(metrics.f_score[metrics.classes.index(c)]) for c in model.classes
        }
        removed: list[int] = []
        if r < rounds:
            taken: set[int] = set()
            for cls_label in model.classes:
                picked = 0
                for fid in top_features(model, cls_label, len(active)):
                    if picked == k:
                        break
                    if fid in taken:
                        continue
                    taken.add(fid)
                    removed.append(fid)
                    picked += 1
            active = [fid for fid in active if fid not in taken]
        out.append(UnmaskRound(r, metrics.weighted_f, per_class_f, tuple(removed)))
        if r < rounds and not removed:
            break  # positive features exhausted: partial curve
    return UnmaskingCurve(granularity, k, classes, out, split.hash())


@dataclass
class SimilarityVector:
    """Symmetrized error shares over unordered dialect pairs."""

    classes: list[str]
    pairs: list[tuple[str, str]]
    shares: np.ndarray
    no_errors: bool

    def top_pairs(self, k: int) -> list[tuple[tuple[str, str], float]]:
        order = sorted(range(len(self.pairs)), key=lambda i: (-self.shares[i], self.pairs[i]))
        return [(self.pairs[i], float(self.shares[i])) for i in order[:k]]


def error_similarity(metrics: Metrics) -> SimilarityVector:
    """Pooled share of off-diagonal errors per unordered class pair.

    Dialects that absorb each other's errors count as similar; a diagonal
    confusion has no errors to share and is flagged instead of divided.
    """
    classes = list(metrics.classes)
    conf = metrics.confusion
    total = int(conf.sum() - np.trace(conf))
    pairs: list[tuple[str, str]] = []
    shares: list[float] = []
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            pairs.append((classes[i], classes[j]))
            pooled = int(conf[i, j] + conf[j, i])
            shares.append(pooled / total if total > 0 else 0.0)
    return SimilarityVector(classes, pairs, np.array(shares), total == 0)


def similarity_correlation(
    vectors: Mapping[str, SimilarityVector],
    reference: SimilarityVector,
    method: str = "pearson",
) -> dict[str, float | None]:
    """Correlate each node's error-share vector with the reference's.

    Vectors align on their common pair ordering. A constant vector has no
    defined correlation and comes back as None (missing), as does an
    alignment with fewer than two shared pairs.
    """
    if method not in ("pearson", "spearman"):
        raise ExperimentError(f"unknown correlation method {method!r}")
    ref_index = {p: i for i, p in enumerate(reference.pairs)}
    out: dict[str, float | None] = {}
    for name, vec in vectors.items():
        vec_index = {p: i for i, p in enumerate(vec.pairs)}
        common = [p for p in vec.pairs if p in ref_index]
        if len(common) < 2:
            out[name] = None
            continue
        a = np.array([vec.shares[vec_index[p]] for p in common])
        b = np.array([reference.shares[ref_index[p]] for p in common])
        if np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
            out[name] = None
            continue
        if method == "pearson":
            out[name] = float(np.corrcoef(a, b)[0, 1])
        else:
            out[name] = float(spearmanr(a, b).statistic)
    return out


def summarize_correlations(values: Sequence[float | None]) -> dict[str, float | int]:
    """Quantile summary for the violin-style figure; None entries counted
    as missing and excluded from quantiles."""
    present = np.array([v for v in values if v is not None], dtype=np.float64)
    summary: dict[str, float | int] = {
        "count": int(present.size),
        "missing": int(len(values) - present.size),
    }
    if present.size:
        qs = np.quantile(present, [0.0, 0.25, 0.5, 0.75, 1.0])
        summary.update(
            {
                "min": float(qs[0]),
                "q25": float(qs[1]),
                "median": float(qs[2]),
                "q75": float(qs[3]),
                "max": float(qs[4]),
            }
        )
    return summary
