"""Shared fixture builders: embedding spaces, grammars, planted corpora."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest

from gramvar.classifier import make_split
from gramvar.embeddings import CategoryCentroid, CategoryInventory, EmbeddingTable
from gramvar.grammar import Construction, Grammar, SlotConstraint
from gramvar.matcher import FeatureMatrix


def slot(kind: str, value: str) -> SlotConstraint:
    return SlotConstraint(kind, value)


def con(cid: int, slots, stage="late", micro="m1", macro="M1") -> Construction:
    return Construction(cid, tuple(slots), stage, micro, macro)


@pytest.fixture
def tiny_tables() -> dict[str, EmbeddingTable]:
    """Two 2-D spaces with hand-placed unit vectors."""
    syn = EmbeddingTable(
        "syn",
        ["refused", "determined", "to", "play", "backtrack", "cat"],
        np.array(
            [
                [1.0, 0.0],
                [0.9962, 0.0872],  # ~5 degrees off "refused"
                [0.0, 1.0],
                [0.7071, -0.7071],
                [0.6561, -0.7547],  # close to "play"
                [-1.0, 0.0],
            ]
        ),
    )
    sem = EmbeddingTable(
        "sem",
        ["river", "mountain", "valley"],
        np.array([[1.0, 0.0], [0.0, 1.0], [0.8, 0.6]]),
    )
    return {"syn": syn, "sem": sem}


@pytest.fixture
def tiny_inventory() -> CategoryInventory:
    return CategoryInventory(
        [
            CategoryCentroid("v_commit", "syn", 0.95, "refused-determined", np.array([1.0, 0.0])),
            CategoryCentroid("p_to", "syn", 0.95, "to-to", np.array([0.0, 1.0])),
            CategoryCentroid("v_act", "syn", 0.95, "play-backtrack", np.array([0.7071, -0.7071])),
            CategoryCentroid("d_water", "sem", 0.9, "river-valley", np.array([1.0, 0.0])),
        ]
    )


def reference_scale_grammar() -> Grammar:
    """A grammar whose stage and cluster counts mirror the reference
    network: 1,045 early constructions in 191 micro / 16 macro clusters
    plus 14,170 late ones in 1,941 micro / 81 macro clusters."""
    cons = []
    cid = 0
    for j in range(1045):
        cid += 1
        m = j % 191
        cons.append(
            Construction(
                cid,
                (slot("SYN", "c1"), slot("SYN", "c2")),
                "early",
                f"em{m}",
                f"eM{m % 16}",
            )
        )
    for j in range(14170):
        cid += 1
        m = j % 1941
        kinds = (
            (slot("LEX", "the"), slot("SYN", "c1")),
            (slot("SEM", "d1"), slot("LEX", "of"), slot("SYN", "c2")),
            (slot("LEX", "at"), slot("LEX", "the"), slot("SEM", "d1"), slot("SYN", "c1")),
        )[j % 3]
        cons.append(Construction(cid, kinds, "late", f"lm{m}", f"lM{m % 81}"))
    return Grammar(cons)


@pytest.fixture(scope="session")
def reference_grammar() -> Grammar:
    return reference_scale_grammar()


def random_grammar(rng: np.random.Generator, n: int, *, categories=None) -> Grammar:
    """Random but invariant-respecting grammar for round-trip and matcher
    fuzzing. ``categories`` supplies (syn_ids, sem_ids) when slots should
    resolve in an inventory."""
    syn_ids, sem_ids = categories if categories else (["c1", "c2", "c3"], ["d1", "d2"])
    lexes = ["the", "of", "to", "a", "in", "at", "go", "'s", ","]
    n_micro = max(1, int(rng.integers(1, n + 1)))
    micro_macro = {f"m{i}": f"M{int(rng.integers(0, max(1, n_micro // 2) + 1))}" for i in range(n_micro)}
    cons = []
    ids = rng.permutation(n * 3)[:n] + 1
    for cid in ids:
        stage = "early" if rng.random() < 0.3 else "late"
        length = int(rng.integers(2, 6))
        slots = []
        for _ in range(length):
            if stage == "early":
                slots.append(slot("SYN", str(rng.choice(syn_ids))))
            else:
                kind = str(rng.choice(["LEX", "SYN", "SEM"]))
                if kind == "LEX":
                    slots.append(slot("LEX", str(rng.choice(lexes))))
                elif kind == "SYN":
                    slots.append(slot("SYN", str(rng.choice(syn_ids))))
                else:
                    slots.append(slot("SEM", str(rng.choice(sem_ids))))
        micro = f"m{int(rng.integers(0, n_micro))}"
        cons.append(Construction(int(cid), tuple(slots), stage, micro, micro_macro[micro]))
    return Grammar(cons)


# --- planted-dialect matrix generator --------------------------------------


def planted_matrix(
    seed: int,
    n_dialects: int = 4,
    samples_per_dialect: int = 30,
    fillers_per_cluster: int = 3,
    signature_rate: float = 7.0,
):
    """Feature matrix with one discriminative construction per cluster.

    Dialect d's signature construction fires Poisson(rate) times per
    sample of d and never elsewhere; every cluster also holds filler
    constructions firing identically across dialects. Signature i lives in
    cluster i, so no single cluster separates more than one dialect from
    the rest.

    The generator's Bayes accuracy has the closed form
    1 - exp(-rate) + exp(-rate)/n_dialects: a sample missing its own
    signature (probability exp(-rate)) is indistinguishable from the
    other zero-signature dialects and a uniform guess is optimal.
    """
    rng = np.random.default_rng(seed)
    dialects = [f"dial{d}" for d in range(n_dialects)]
    n_features = n_dialects * (1 + fillers_per_cluster)
    rows, labels = [], []
    for d in range(n_dialects):
        for _ in range(samples_per_dialect):
            row = np.zeros(n_features)
            for c in range(n_dialects):
                base = c * (1 + fillers_per_cluster)
                if c == d:
                    row[base] = rng.poisson(signature_rate)
                row[base + 1 : base + 1 + fillers_per_cluster] = rng.poisson(
                    3.0, fillers_per_cluster
                )
            rows.append(row)
            labels.append(dialects[d])
    X = np.vstack(rows)
    order = rng.permutation(len(labels))
    X = X[order]
    labels = [labels[i] for i in order]

    construction_ids = list(range(1, n_features + 1))
    cons = []
    for c in range(n_dialects):
        base = c * (1 + fillers_per_cluster)
        for k in range(1 + fillers_per_cluster):
            cid = construction_ids[base + k]
            cons.append(
                Construction(
                    cid,
                    (slot("LEX", "a"), slot("LEX", "b")),
                    "late",
                    f"m{c}",
                    f"M{c % 2}",
                )
            )
    grammar = Grammar(cons)
    fm = FeatureMatrix(
        matrix=X,
        sample_ids=[f"s{i}" for i in range(len(labels))],
        construction_ids=construction_ids,
        labels={"region": labels, "country": labels, "area": labels},
        meta={"normalization": "raw"},
    )
    bayes = 1.0 - math.exp(-signature_rate) + math.exp(-signature_rate) / n_dialects
    return fm, grammar, bayes


@pytest.fixture
def planted():
    fm, grammar, bayes = planted_matrix(seed=11)
    split = make_split(fm.labels["region"], seed=5)
    return fm, grammar, bayes, split


# --- end-to-end CLI fixture -------------------------------------------------


def build_pipeline_fixture(root: Path, *, docs_per_area: int = 30, rounds: int = 3) -> Path:
    """Write a self-contained input tree: corpus, grammar, embeddings,
    airports, keywords, and a config file. Returns the config path.

    Four areas (two per country, two countries in two regions), three
    keywords, and one signature construction per area.
    """
    root.mkdir(parents=True, exist_ok=True)
    syn_words = {
        "alpha": (1.0, 0.0),
        "beta": (0.0, 1.0),
        "gamma": (0.7071, 0.7071),
        "know": (0.9, 0.1),
        "time": (0.1, 0.9),
    }
    sem_words = {"river": (1.0, 0.0), "mountain": (0.0, 1.0), "people": (0.8, 0.2)}
    (root / "syn.tsv").write_text(
        "".join(f"{w}\t{v[0]} {v[1]}\n" for w, v in syn_words.items())
    )
    (root / "sem.tsv").write_text(
        "".join(f"{w}\t{v[0]} {v[1]}\n" for w, v in sem_words.items())
    )
    (root / "categories.csv").write_text(
        "category_id,space,threshold,display_name,vector\n"
        "c_alpha,syn,0.95,alpha-know,1.0 0.0\n"
        "c_beta,syn,0.95,beta-time,0.0 1.0\n"
        "d_river,sem,0.95,river-people,1.0 0.0\n"
    )
    lines = [
        "1\tearly\tm1\tM1\tSYN:c_alpha SYN:c_beta",
        "2\tlate\tm1\tM1\tLEX:sig1 LEX:go",
        "3\tlate\tm2\tM1\tLEX:sig2 LEX:go",
        "4\tlate\tm3\tM2\tLEX:sig3 LEX:go",
        "5\tlate\tm4\tM2\tLEX:sig4 LEX:go",
        "6\tearly\tm2\tM1\tSYN:c_beta SYN:c_alpha",
        "7\tlate\tm3\tM2\tLEX:common LEX:go",
        "8\tlate\tm4\tM2\tSEM:d_river LEX:go",
    ]
    (root / "grammar.tsv").write_text("\n".join(lines) + "\n")
    blobs = {
        "CA": [(45.0, -75.0), (49.0, -123.0)],
        "AU": [(-33.8, 151.2), (-37.8, 144.9)],
    }
    rows = ["code,lat,lon,country"]
    for country, centers in blobs.items():
        n = 0
        for cx, cy in centers:
            for dx, dy in ((0, 0), (0.05, 0.02), (-0.04, -0.03)):
                n += 1
                rows.append(f"{country}{n},{cx + dx},{cy + dy},{country}")
    (root / "airports.csv").write_text("\n".join(rows) + "\n")
    (root / "regions.csv").write_text("country,region\nCA,north-america\nAU,oceania\n")
    (root / "keywords.txt").write_text("know\ntime\npeople\n")
    area_sig = {("CA", 0): "sig1", ("CA", 1): "sig2", ("AU", 0): "sig3", ("AU", 1): "sig4"}
    kw_extra = {"know": "alpha beta", "time": "common go", "people": "river go"}
    doc_id = 0
    with (root / "corpus.jsonl").open("w") as fh:
        for country, centers in blobs.items():
            for bi, (cx, cy) in enumerate(centers):
                sig = area_sig[(country, bi)]
                for rep in range(docs_per_area):
                    for kw in ("know", "time", "people"):
                        doc_id += 1
                        rec = {
                            "id": f"d{doc_id}",
                            "text": f"{kw} {sig} go {kw_extra[kw]}",
                            "lat": cx + 0.001 * (rep % 7),
                            "lon": cy + 0.001 * (rep % 5),
                        }
                        fh.write(json.dumps(rec) + "\n")
    config = root / "gramvar.ini"
    config.write_text(
        "[corpus]\npath = corpus.jsonl\nkeywords = keywords.txt\n"
        "[geo]\nairports = airports.csv\nregions = regions.csv\n"
        "[grammar]\npath = grammar.tsv\ncategories = categories.csv\n"
        "[embeddings]\nsyn = syn.tsv\nsem = sem.tsv\n"
        f"[unmasking]\nrounds = {rounds}\nremove_per_class = 1\n"
        "[run]\nseed = 7\n"
    )
    return config


@pytest.fixture
def pipeline_config(tmp_path: Path) -> Path:
    return build_pipeline_fixture(tmp_path / "fx")
