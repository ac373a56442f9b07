"""Token embeddings and category centroids.

Two distributional spaces sit behind slot constraints: a local-window space
for syntactic categories and a wide-window space for semantic domains. A
category is a unit centroid in one of the spaces plus a cosine threshold;
a token satisfies the category when its vector clears the threshold.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

SPACES = ("syn", "sem")
DEFAULT_THRESHOLD = 0.5


class EmbeddingError(Exception):
    """Fatal problem with an embedding table or category inventory."""


class EmbeddingTable:
    """Vocabulary plus a row-per-word matrix for one space.

    Rows are unit-normalized at construction time.
    """

    def __init__(self, space: str, words: Sequence[str], matrix: np.ndarray):
        if space not in SPACES:
            raise EmbeddingError(f"unknown space {space!r}")
        if len(words) != matrix.shape[0]:
            raise EmbeddingError("vocabulary and matrix row count differ")
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(norms == 0.0):
            raise EmbeddingError("zero vector cannot be normalized")
        self.space = space
        self.words = list(words)
        self.index = {w: i for i, w in enumerate(self.words)}
        self.matrix = np.asarray(matrix, dtype=np.float64) / norms[:, None]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def __len__(self) -> int:
        return len(self.words)

    def vector(self, word: str) -> np.ndarray | None:
        i = self.index.get(word)
        return None if i is None else self.matrix[i]


def load_embeddings(path: str | Path, space: str) -> EmbeddingTable:
    """Read a table of ``word<TAB>v1 v2 ...`` lines into unit vectors.

    A repeated word overwrites the earlier vector (with a warning); an
    all-zero vector is rejected with a warning since it cannot be
    normalized. Dimension mismatches are fatal.
    """
    path = Path(path)
    if not path.is_file():
        raise EmbeddingError(f"embedding table not found: {path}")
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with path.open("r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            try:
                word, rest = line.split("\t", 1)
            except ValueError:
                raise EmbeddingError(f"{path}:{ln}: expected word<TAB>values")
            try:
                vec = np.array(rest.split(), dtype=np.float64)
            except ValueError:
                raise EmbeddingError(f"{path}:{ln}: non-numeric vector for {word!r}")
            if vec.size == 0 or not np.all(np.isfinite(vec)):
                raise EmbeddingError(f"{path}:{ln}: bad vector for {word!r}")
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise EmbeddingError(
                    f"{path}:{ln}: dimension {vec.size} != {dim} for {word!r}"
                )
            if not vec.any():
                log.warning("rejecting zero vector for %r", word)
                continue
            if word in vectors:
                log.warning("duplicate embedding for %r, keeping last", word)
            vectors[word] = vec
    if not vectors:
        raise EmbeddingError(f"no usable vectors in {path}")
    words = list(vectors)
    return EmbeddingTable(space, words, np.vstack([vectors[w] for w in words]))


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; 0.0 when either vector has zero norm."""
    u, v = np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise EmbeddingError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


@dataclass(frozen=True)
class CategoryCentroid:
    category_id: str
    space: str
    threshold: float
    display_name: str
    vector: np.ndarray

    def __post_init__(self):
        if self.space not in SPACES:
            raise EmbeddingError(f"unknown space {self.space!r} for {self.category_id}")
        if not (-1.0 <= self.threshold <= 1.0):
            raise EmbeddingError(f"threshold outside [-1, 1] for {self.category_id}")
        norm = float(np.linalg.norm(self.vector))
        if norm == 0.0:
            raise EmbeddingError(f"zero centroid for {self.category_id}")
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=np.float64) / norm)


class CategoryInventory:
    """All category centroids, addressable by id."""

    def __init__(self, centroids: Sequence[CategoryCentroid]):
        self.by_id: dict[str, CategoryCentroid] = {}
        for c in centroids:
            if c.category_id in self.by_id:
                raise EmbeddingError(f"duplicate category id: {c.category_id}")
            self.by_id[c.category_id] = c

    def __contains__(self, category_id: str) -> bool:
        return category_id in self.by_id

    def __len__(self) -> int:
        return len(self.by_id)

    def get(self, category_id: str) -> CategoryCentroid:
        try:
            return self.by_id[category_id]
        except KeyError:
            raise EmbeddingError(f"unknown category id: {category_id}") from None

    def in_space(self, space: str) -> list[CategoryCentroid]:
        return [c for c in self.by_id.values() if c.space == space]


def load_categories(path: str | Path) -> CategoryInventory:
    """CSV inventory: category_id, space, threshold, display_name, vector.

    The vector column is space-separated floats (normalized on load). A
    blank threshold falls back to the default.
    """
    path = Path(path)
    if not path.is_file():
        raise EmbeddingError(f"category inventory not found: {path}")
    out = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            thr = (row.get("threshold") or "").strip()
            out.append(
                CategoryCentroid(
                    category_id=row["category_id"].strip(),
                    space=row["space"].strip().lower(),
                    threshold=float(thr) if thr else DEFAULT_THRESHOLD,
                    display_name=(row.get("display_name") or "").strip(),
                    vector=np.array(row["vector"].split(), dtype=np.float64),
                )
            )
    return CategoryInventory(out)


def satisfies_category(
    token: str,
    centroid: CategoryCentroid,
    tables: Mapping[str, EmbeddingTable],
) -> bool:
    """Does the token's vector in the centroid's space clear the threshold?

    Out-of-vocabulary tokens satisfy nothing.
    """
    table = tables.get(centroid.space)
    if table is None:
        raise EmbeddingError(f"no embedding table for space {centroid.space!r}")
    vec = table.vector(token)
    if vec is None:
        return False
    return cosine(vec, centroid.vector) >= centroid.threshold


def satisfies(
    token: str,
    constraint,
    tables: Mapping[str, EmbeddingTable],
    inventory: CategoryInventory,
) -> bool:
    """Slot-constraint satisfaction for a single token.

    LEX demands exact string equality (tokens are already lowercased);
    SYN and SEM resolve their category and defer to the centroid test.
    """
    if constraint.kind == "LEX":
        return token == constraint.value
    return satisfies_category(token, inventory.get(constraint.value), tables)


def name_centroid(
    centroid: CategoryCentroid | np.ndarray,
    table: EmbeddingTable,
    k: int = 2,
) -> str:
    """Human-readable label: the k nearest vocabulary words, dash-joined.

    Ties break toward the earlier vocabulary entry.
    """
    vec = np.asarray(centroid.vector if isinstance(centroid, CategoryCentroid) else centroid)
    cnorm = float(np.linalg.norm(vec))
    if cnorm == 0.0:
        raise EmbeddingError("cannot name a zero centroid")
    sims = table.matrix @ (vec / cnorm)
    order = sorted(range(len(table.words)), key=lambda i: (-sims[i], i))
    return "-".join(table.words[i] for i in order[: max(1, k)])
