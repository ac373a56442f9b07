"""Construction matching and feature extraction.

``match_construction`` is the executable contract: a brute-force scan that
checks every start position against every slot. ``MatchEngine`` is the
production path and must agree with it exactly; it earns its speed from
first-slot indexing (literal buckets for LEX, category buckets for SYN and
SEM) and from memoizing each token type's satisfied-category set, computed
in one matrix product per space.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .corpus import Sample
from .embeddings import CategoryInventory, EmbeddingTable, satisfies
from .grammar import Construction, Grammar, grammar_hash

NORMALIZATIONS = ("raw", "per_token")


class MatcherError(Exception):
    """Fatal problem while matching or assembling feature matrices."""


class MatchSpan(NamedTuple):
    construction_id: int
    start: int
    end: int


def match_construction(
    tokens: Sequence[str],
    construction: Construction,
    tables: Mapping[str, EmbeddingTable],
    inventory: CategoryInventory,
) -> list[MatchSpan]:
    """All spans where the construction matches: one token per slot,
    contiguous, every start position reported (overlaps allowed).

    Reference implementation; kept deliberately naive.
    """
    slots = construction.slots
    length = len(slots)
    out = []
    for i in range(len(tokens) - length + 1):
        if all(satisfies(tokens[i + j], s, tables, inventory) for j, s in enumerate(slots)):
            out.append(MatchSpan(construction.id, i, i + length))
    return out


class MatchEngine:
    """Shared, immutable matcher for one grammar against many documents.

    The satisfied-category memo is keyed by token type; concurrent reads
    and redundant recomputation are both safe because entries are pure
    functions of the token.
    """

    def __init__(
        self,
        grammar: Grammar,
        tables: Mapping[str, EmbeddingTable],
        inventory: CategoryInventory,
    ):
        if len(grammar) == 0:
            raise MatcherError("empty grammar")
        self.grammar = grammar
        self.tables = dict(tables)
        self.inventory = inventory
        self.construction_ids = sorted(grammar.by_id)
        self.column = {cid: k for k, cid in enumerate(self.construction_ids)}
        self._max_len = max(len(c.slots) for c in grammar.constructions)

        self._lex_first: dict[str, list[Construction]] = {}
        self._cat_first: dict[str, list[Construction]] = {}
        for cid in self.construction_ids:
            c = grammar.by_id[cid]
            first = c.slots[0]
            bucket = self._lex_first if first.kind == "LEX" else self._cat_first
            bucket.setdefault(first.value, []).append(c)

        # per space: ids, stacked centroid matrix, threshold vector
        self._spaces: list[tuple[str, list[str], np.ndarray, np.ndarray]] = []
        used = grammar.categories_used()
        for space in ("syn", "sem"):
            cats = sorted(c for c in used if inventory.get(c).space == space)
            if not cats:
                continue
            if space not in self.tables:
                raise MatcherError(f"grammar uses {space} categories but no table given")
            matrix = np.vstack([inventory.get(c).vector for c in cats])
            thresholds = np.array([inventory.get(c).threshold for c in cats])
            self._spaces.append((space, cats, matrix, thresholds))
        self._memo: dict[str, frozenset[str]] = {}

    def satisfied_categories(self, token: str) -> frozenset[str]:
        got = self._memo.get(token)
        if got is not None:
            return got
        acc: list[str] = []
        for space, cats, matrix, thresholds in self._spaces:
            vec = self.tables[space].vector(token)
            if vec is None:
                continue
            sims = matrix @ vec
            acc.extend(c for c, ok in zip(cats, sims >= thresholds) if ok)
        result = frozenset(acc)
        self._memo[token] = result
        return result

    def _tail_ok(self, c: Construction, tokens: Sequence[str], i: int) -> bool:
        for j in range(1, len(c.slots)):
            s = c.slots[j]
            t = tokens[i + j]
            if s.kind == "LEX":
                if t != s.value:
                    return False
            elif s.value not in self.satisfied_categories(t):
                return False
        return True

    def match_document(self, tokens: Sequence[str]) -> list[MatchSpan]:
        """All spans of all constructions, sorted by (construction, start)."""
        n = len(tokens)
        spans = []
        for i, tok in enumerate(tokens):
            candidates = self._lex_first.get(tok, ())
            for c in candidates:
                if i + len(c.slots) <= n and self._tail_ok(c, tokens, i):
                    spans.append(MatchSpan(c.id, i, i + len(c.slots)))
            for cat in self.satisfied_categories(tok):
                for c in self._cat_first.get(cat, ()):
                    if i + len(c.slots) <= n and self._tail_ok(c, tokens, i):
                        spans.append(MatchSpan(c.id, i, i + len(c.slots)))
        spans.sort()
        return spans

    def count_document(self, tokens: Sequence[str], binary: bool = False) -> np.ndarray:
        """Per-construction match counts for one document.

        ``binary`` collapses within-document repeats to presence, covering
        the reading where a construction counts once per post.
        """
        counts = np.zeros(len(self.construction_ids))
        for span in self.match_document(tokens):
            counts[self.column[span.construction_id]] += 1.0
        if binary:
            counts = (counts > 0).astype(np.float64)
        return counts


@dataclass(frozen=True)
class FeatureVector:
    sample_id: str
    values: np.ndarray


def extract_features(
    sample: Sample,
    documents: Mapping[str, Sequence[str]],
    engine: MatchEngine,
    normalization: str = "per_token",
    binary: bool = False,
) -> FeatureVector:
    """Construction-frequency vector for one sample.

    ``documents`` maps document id to its token list. Counts add over the
    sample's documents; per_token divides by the sample's token count so
    length differences between samples do not leak into the features.
    """
    if normalization not in NORMALIZATIONS:
        raise MatcherError(f"unknown normalization {normalization!r}")
    values = np.zeros(len(engine.construction_ids))
    for doc_id in sample.documents:
        tokens = documents.get(doc_id)
        if tokens is None:
            raise MatcherError(f"sample {sample.id}: missing document {doc_id}")
        values += engine.count_document(tokens, binary=binary)
    if normalization == "per_token":
        if sample.token_count <= 0:
            raise MatcherError(f"sample {sample.id}: non-positive token count")
        values = values / float(sample.token_count)
    return FeatureVector(sample.id, values)


@dataclass
class FeatureMatrix:
    """Dense sample-by-construction matrix with labels and provenance."""

    matrix: np.ndarray
    sample_ids: list[str]
    construction_ids: list[int]
    labels: dict[str, list[str]]  # granularity -> per-row labels
    meta: dict

    def save(self, prefix: str | Path) -> None:
        """``<prefix>.npy`` for the matrix, ``<prefix>.json`` sidecar."""
        prefix = Path(prefix)
        np.save(prefix.with_suffix(".npy"), self.matrix)
        sidecar = {
            "sample_ids": self.sample_ids,
            "construction_ids": self.construction_ids,
            "labels": self.labels,
            "meta": self.meta,
        }
        prefix.with_suffix(".json").write_text(
            json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, prefix: str | Path) -> "FeatureMatrix":
        prefix = Path(prefix)
        npy, sidecar = prefix.with_suffix(".npy"), prefix.with_suffix(".json")
        if not npy.is_file() or not sidecar.is_file():
            raise MatcherError(f"feature matrix not found at {prefix}(.npy/.json)")
        data = json.loads(sidecar.read_text(encoding="utf-8"))
        return cls(
            matrix=np.load(npy),
            sample_ids=data["sample_ids"],
            construction_ids=data["construction_ids"],
            labels=data["labels"],
            meta=data["meta"],
        )


def build_matrix(
    samples: Sequence[Sample],
    documents: Mapping[str, Sequence[str]],
    engine: MatchEngine,
    normalization: str = "per_token",
    binary: bool = False,
    threads: int = 1,
) -> FeatureMatrix:
    """Feature matrix over all samples.

    Rows follow the given sample order, columns follow construction id
    order. Every sample must be labeled at all three granularities.
    """
    for s in samples:
        if not (s.area_label and s.country_label and s.region_label):
            raise MatcherError(f"sample {s.id}: missing granularity label")

    def one(sample: Sample) -> np.ndarray:
        return extract_features(sample, documents, engine, normalization, binary).values

    if threads > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, samples))
    else:
        rows = [one(s) for s in samples]

    matrix = np.vstack(rows) if rows else np.zeros((0, len(engine.construction_ids)))
    thresholds = {
        cid: engine.inventory.get(cid).threshold
        for cid in sorted(engine.grammar.categories_used())
    }
    return FeatureMatrix(
        matrix=matrix,
        sample_ids=[s.id for s in samples],
        construction_ids=list(engine.construction_ids),
        labels={
            "region": [s.region_label for s in samples],
            "country": [s.country_label for s in samples],
            "area": [s.area_label for s in samples],
        },
        meta={
            "grammar_hash": grammar_hash(engine.grammar),
            "normalization": normalization,
            "binary": binary,
            "thresholds": thresholds,
        },
    )
