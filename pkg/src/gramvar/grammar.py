"""Constructions, the grammar, and its cluster network.

A construction is an ordered sequence of slot constraints. Each slot is
either a literal lexeme (LEX) or a category in one of the two embedding
spaces: local-window syntactic categories (SYN) or wide-window semantic
domains (SEM). Constructions carry a learning stage and membership in one
micro-cluster, which in turn belongs to one macro-cluster.

Grammar file format (line-delimited, tab-separated):

    id<TAB>stage<TAB>micro<TAB>macro<TAB>KIND:value KIND:value ...

Blank lines and lines starting with # are ignored. Slot values never
contain whitespace because the tokenizer never emits tokens that do.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .embeddings import CategoryInventory, EmbeddingTable

STAGES = ("early", "late")
SLOT_KINDS = ("LEX", "SYN", "SEM")
_KIND_SPACE = {"SYN": "syn", "SEM": "sem"}


class GrammarError(Exception):
    """Fatal problem with a grammar file or cluster structure."""


@dataclass(frozen=True)
class SlotConstraint:
    kind: str
    value: str

    def __post_init__(self):
        if self.kind not in SLOT_KINDS:
            raise GrammarError(f"unknown slot kind {self.kind!r}")
        if not self.value:
            raise GrammarError("empty slot value")
        if self.kind == "LEX" and self.value != self.value.lower():
            raise GrammarError(f"LEX value must be lowercase: {self.value!r}")

    def __str__(self) -> str:
        return f"{self.kind}:{self.value}"


@dataclass(frozen=True)
class Construction:
    id: int
    slots: tuple[SlotConstraint, ...]
    stage: str
    micro: str
    macro: str

    def __post_init__(self):
        if len(self.slots) < 2:
            raise GrammarError(f"construction {self.id}: needs at least 2 slots")
        if self.stage not in STAGES:
            raise GrammarError(f"construction {self.id}: unknown stage {self.stage!r}")
        if self.stage == "early" and any(s.kind != "SYN" for s in self.slots):
            raise GrammarError(
                f"construction {self.id}: early stage allows only SYN slots"
            )


class Grammar:
    """Immutable constructicon plus its micro/macro network.

    Every construction sits in exactly one micro-cluster and every
    micro-cluster in exactly one macro-cluster; violations are fatal here
    rather than surfacing as bad counts downstream.
    """

    def __init__(
        self,
        constructions: Sequence[Construction],
        inventory: CategoryInventory | None = None,
    ):
        self.constructions = list(constructions)
        self.inventory = inventory
        self.by_id: dict[int, Construction] = {}
        self.network: dict[str, str] = {}  # micro -> macro
        for c in self.constructions:
            if c.id in self.by_id:
                raise GrammarError(f"duplicate construction id: {c.id}")
            self.by_id[c.id] = c
            got = self.network.get(c.micro)
            if got is None:
                self.network[c.micro] = c.macro
            elif got != c.macro:
                raise GrammarError(
                    f"micro-cluster {c.micro} spans macro-clusters {got} and {c.macro}"
                )
            if inventory is not None:
                for s in c.slots:
                    if s.kind == "LEX":
                        continue
                    if s.value not in inventory:
                        raise GrammarError(
                            f"construction {c.id}: unknown category {s.value!r}"
                        )
                    space = inventory.get(s.value).space
                    if space != _KIND_SPACE[s.kind]:
                        raise GrammarError(
                            f"construction {c.id}: {s.kind} slot uses {space}-space "
                            f"category {s.value!r}"
                        )

    def __len__(self) -> int:
        return len(self.constructions)

    def __iter__(self):
        return iter(self.constructions)

    def categories_used(self) -> set[str]:
        return {s.value for c in self.constructions for s in c.slots if s.kind != "LEX"}


def parse_grammar(path: str | Path, inventory: CategoryInventory | None = None) -> Grammar:
    """Parse and validate a grammar file.

    When an inventory is given, every SYN/SEM slot must resolve to a
    category in the matching space; without one, resolution is deferred.
    """
    path = Path(path)
    if not path.is_file():
        raise GrammarError(f"grammar file not found: {path}")
    constructions = []
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise GrammarError(f"{path}:{ln}: expected 5 tab-separated fields")
        try:
            cid = int(fields[0])
        except ValueError:
            raise GrammarError(f"{path}:{ln}: non-integer construction id")
        slots = []
        for part in fields[4].split():
            kind, sep, value = part.partition(":")
            if not sep:
                raise GrammarError(f"{path}:{ln}: malformed slot {part!r}")
            slots.append(SlotConstraint(kind, value))
        constructions.append(
            Construction(cid, tuple(slots), fields[1], fields[2], fields[3])
        )
    if not constructions:
        raise GrammarError(f"{path}: no constructions")
    return Grammar(constructions, inventory)


def serialize(grammar: Grammar) -> str:
    """Canonical text form: id-sorted records in the file format."""
    lines = []
    for c in sorted(grammar.constructions, key=lambda c: c.id):
        slots = " ".join(str(s) for s in c.slots)
        lines.append(f"{c.id}\t{c.stage}\t{c.micro}\t{c.macro}\t{slots}")
    return "\n".join(lines) + "\n"


def grammar_hash(grammar: Grammar) -> str:
    return hashlib.sha256(serialize(grammar).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GrammarStats:
    total: int
    by_stage: dict[str, int]
    by_micro: dict[str, int]
    by_macro: dict[str, int]

    @property
    def micro_clusters(self) -> int:
        return len(self.by_micro)

    @property
    def macro_clusters(self) -> int:
        return len(self.by_macro)


def stats(grammar: Grammar) -> GrammarStats:
    by_stage: dict[str, int] = {}
    by_micro: dict[str, int] = {}
    by_macro: dict[str, int] = {}
    for c in grammar.constructions:
        by_stage[c.stage] = by_stage.get(c.stage, 0) + 1
        by_micro[c.micro] = by_micro.get(c.micro, 0) + 1
        by_macro[c.macro] = by_macro.get(c.macro, 0) + 1
    return GrammarStats(len(grammar.constructions), by_stage, by_micro, by_macro)


def filter_by_stage(grammar: Grammar, stage: str) -> Grammar:
    if stage not in STAGES:
        raise GrammarError(f"unknown stage {stage!r}")
    kept = [c for c in grammar.constructions if c.stage == stage]
    return Grammar(kept, grammar.inventory)


class Node(NamedTuple):
    """Address of one grammar-network node."""

    kind: str  # "micro" or "macro"
    id: str


def parse_node(text: str) -> Node:
    """Parse CLI-style ``micro:<id>`` / ``macro:<id>``."""
    kind, sep, node_id = text.partition(":")
    if not sep or kind not in ("micro", "macro") or not node_id:
        raise GrammarError(f"malformed node {text!r}, expected micro:<id> or macro:<id>")
    return Node(kind, node_id)


def filter_by_node(grammar: Grammar, node: Node) -> Grammar:
    if node.kind == "micro":
        known = {c.micro for c in grammar.constructions}
        kept = [c for c in grammar.constructions if c.micro == node.id]
    elif node.kind == "macro":
        known = {c.macro for c in grammar.constructions}
        kept = [c for c in grammar.constructions if c.macro == node.id]
    else:
        raise GrammarError(f"unknown node kind {node.kind!r}")
    if node.id not in known:
        raise GrammarError(f"unknown {node.kind}-cluster: {node.id}")
    return Grammar(kept, grammar.inventory)


def all_nodes(grammar: Grammar) -> list[Node]:
    """Every micro and macro node, micro first, id-sorted within kind."""
    micro = sorted({c.micro for c in grammar.constructions})
    macro = sorted({c.macro for c in grammar.constructions})
    return [Node("micro", m) for m in micro] + [Node("macro", m) for m in macro]


def export_network(grammar: Grammar, path: str | Path) -> None:
    """Edge list construction -> micro -> macro, one row per construction."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("construction\tmicro\tmacro\n")
        for c in sorted(grammar.constructions, key=lambda c: c.id):
            fh.write(f"{c.id}\t{c.micro}\t{c.macro}\n")


# --- cluster recomputation stand-in ---------------------------------------
# The published cluster counts come from a procedure that is not public, so
# recomputation is an explicitly approximate substitute: token-set Jaccard
# under average linkage for micro-clusters, positional slot agreement of
# micro medoids under average linkage for macro-clusters. Annotations in the
# grammar file always take precedence when present.


def positional_agreement(a: Construction, b: Construction) -> float:
    """Share of aligned slots with identical (kind, value), over max length."""
    agree = sum(1 for x, y in zip(a.slots, b.slots) if x == y)
    return agree / max(len(a.slots), len(b.slots))


def matched_token_sets(
    grammar: Grammar,
    reference_corpus: Sequence[Sequence[str]],
    tables: Mapping[str, EmbeddingTable],
    inventory: CategoryInventory,
) -> dict[int, frozenset[str]]:
    """Per construction, the set of distinct matched token strings."""
    from .matcher import MatchEngine

    engine = MatchEngine(grammar, tables, inventory)
    acc: dict[int, set[str]] = {c.id: set() for c in grammar.constructions}
    for tokens in reference_corpus:
        for span in engine.match_document(list(tokens)):
            acc[span.construction_id].add(" ".join(tokens[span.start : span.end]))
    return {cid: frozenset(s) for cid, s in acc.items()}


def _jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def token_similarity_matrix(
    grammar: Grammar,
    reference_corpus: Sequence[Sequence[str]],
    tables: Mapping[str, EmbeddingTable],
    inventory: CategoryInventory,
) -> tuple[list[int], np.ndarray]:
    """Jaccard overlap of matched-token sets; unit diagonal by definition."""
    if not reference_corpus:
        raise GrammarError("empty reference corpus: token similarity undefined")
    sets = matched_token_sets(grammar, reference_corpus, tables, inventory)
    ids = sorted(sets)
    n = len(ids)
    sim = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            sim[i, j] = sim[j, i] = _jaccard(sets[ids[i]], sets[ids[j]])
    return ids, sim


@dataclass(frozen=True)
class ClusterNetwork:
    construction_to_micro: dict[int, str]
    micro_to_macro: dict[str, str]

    def apply(self, grammar: Grammar) -> Grammar:
        out = [
            replace(
                c,
                micro=self.construction_to_micro[c.id],
                macro=self.micro_to_macro[self.construction_to_micro[c.id]],
            )
            for c in grammar.constructions
        ]
        return Grammar(out, grammar.inventory)


def _cut(sim: np.ndarray, threshold: float) -> np.ndarray:
    """Average-linkage flat clusters on distance 1 - sim."""
    n = sim.shape[0]
    if n == 1:
        return np.array([1])
    dist = np.clip(1.0 - sim, 0.0, None)
    np.fill_diagonal(dist, 0.0)
    z = linkage(squareform(dist, checks=False), method="average")
    return fcluster(z, t=1.0 - threshold, criterion="distance")


def compute_clusters(
    grammar: Grammar,
    reference_corpus: Sequence[Sequence[str]],
    tables: Mapping[str, EmbeddingTable],
    inventory: CategoryInventory,
    *,
    micro_threshold: float = 0.5,
    macro_threshold: float = 0.25,
) -> ClusterNetwork:
    """Derive micro/macro clusters for a grammar lacking annotations.

    Micro-clusters group constructions whose matched-token sets overlap;
    macro-clusters group micro medoids whose slot sequences agree. Cluster
    ids are numbered by each cluster's smallest construction id, so output
    is stable under construction reordering.
    """
    ids, tok_sim = token_similarity_matrix(grammar, reference_corpus, tables, inventory)
    flat = _cut(tok_sim, micro_threshold)
    groups: dict[int, list[int]] = {}
    for pos, lbl in enumerate(flat):
        groups.setdefault(int(lbl), []).append(pos)
    ordered = sorted(groups.values(), key=lambda ps: min(ids[p] for p in ps))

    construction_to_micro: dict[int, str] = {}
    medoids: list[Construction] = []
    for n, positions in enumerate(ordered, start=1):
        micro_id = f"m{n}"
        for p in positions:
            construction_to_micro[ids[p]] = micro_id
        # medoid: max average token similarity inside the cluster, lowest id on ties
        best = min(
            positions,
            key=lambda p: (-float(np.mean([tok_sim[p, q] for q in positions])), ids[p]),
        )
        medoids.append(grammar.by_id[ids[best]])

    k = len(medoids)
    rep = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            rep[i, j] = rep[j, i] = positional_agreement(medoids[i], medoids[j])
    macro_flat = _cut(rep, macro_threshold)
    macro_groups: dict[int, list[int]] = {}
    for pos, lbl in enumerate(macro_flat):
        macro_groups.setdefault(int(lbl), []).append(pos)
    macro_ordered = sorted(macro_groups.values(), key=lambda ps: min(medoids[p].id for p in ps))
    micro_to_macro: dict[str, str] = {}
    for n, positions in enumerate(macro_ordered, start=1):
        for p in positions:
            micro_to_macro[f"m{p + 1}"] = f"M{n}"
    return ClusterNetwork(construction_to_micro, micro_to_macro)
