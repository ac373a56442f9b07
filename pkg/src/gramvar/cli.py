"""Command-line pipeline driver.

Subcommands mirror the pipeline order: areas, sample, features, train,
evaluate, node-scan, unmask, error-corr, report. Each writes into the run
directory and prints a one-line summary. Exit codes: 0 success, 2 invalid
configuration or input, 3 missing pipeline artifact (run the named
subcommand first).

Every artifact write is canonical (sorted keys, fixed float formats, no
timestamps), so re-running a subcommand with identical inputs overwrites
its outputs byte-identically.
"""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import (
    ClassifierError,
    LinearModel,
    Metrics,
    SplitSpec,
    evaluate as evaluate_model,
    make_split,
    train as train_model,
)
from .config import ConfigError, RunConfig, load_config
from .corpus import (
    CorpusError,
    KeywordSet,
    LocationLabels,
    SamplerStats,
    build_samples,
    default_keywords,
    ingest,
    load_sample_manifest,
    save_sample_manifest,
    tokenize,
)
from .embeddings import EmbeddingError, load_categories, load_embeddings
from .experiments import (
    ExperimentError,
    NodeScanResult,
    SimilarityVector,
    error_similarity,
    node_scan,
    similarity_correlation,
    summarize_correlations,
    unmask,
)
from .geo import (
    NOISE_AREA,
    AirportIndex,
    GeoError,
    apply_overrides,
    cluster_airports,
    load_airports,
    load_area_manifest,
    save_area_manifest,
)
from .grammar import GrammarError, filter_by_stage, grammar_hash, parse_grammar
from .matcher import FeatureMatrix, MatchEngine, MatcherError, build_matrix
from .report import render_correlation_summary, render_node_scatter, render_unmasking

_USER_ERRORS = (
    ConfigError,
    CorpusError,
    GeoError,
    GrammarError,
    EmbeddingError,
    MatcherError,
    ClassifierError,
    ExperimentError,
)


class MissingArtifact(Exception):
    """A pipeline artifact expected in the run directory is absent."""


def _need(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifact(f"{path} (run `gramvar {producer}` first)")
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _write_csv(path: Path, rows: list[list[str]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerows(rows)


def _update_meta(run_dir: Path, **fields) -> None:
    meta_path = run_dir / "run_meta.json"
    meta = {}
    if meta_path.is_file():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    meta.update(fields)
    meta["versions"] = {
        "gramvar": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    _write_json(meta_path, meta)


def _load_regions(cfg: RunConfig) -> dict[str, str]:
    if cfg.regions_path is None:
        return {}
    out = {}
    with cfg.regions_path.open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["country"].strip()] = row["region"].strip()
    return out


# --- subcommands -----------------------------------------------------------


def _cmd_areas(cfg: RunConfig) -> int:
    cfg.require(airports_path="airport inventory")
    airports = load_airports(cfg.airports_path)
    assignment = cluster_airports(
        airports,
        min_cluster_size=cfg.min_cluster_size,
        leaf=cfg.leaf,
        regions=_load_regions(cfg),
    )
    if cfg.overrides_path is not None:
        cfg.require(overrides_path="override file")
        assignment = apply_overrides(assignment, cfg.overrides_path)
    save_area_manifest(assignment, cfg.run_dir / "areas.csv")
    _update_meta(cfg.run_dir, config_hash=cfg.hash())
    noise = sum(1 for a in assignment.airport_to_area.values() if a == NOISE_AREA)
    print(
        f"areas: {len(assignment.areas())} areas over "
        f"{len(airports)} airports ({noise} noise)"
    )
    return 0


def _cmd_sample(cfg: RunConfig) -> int:
    cfg.require(corpus_path="corpus")
    areas_path = _need(cfg.run_dir / "areas.csv", "areas")
    assignment = load_area_manifest(areas_path)
    index = AirportIndex(list(assignment.airports.values()))
    keywords = (
        KeywordSet.from_file(cfg.keywords_path)
        if cfg.keywords_path is not None
        else default_keywords()
    )

    docs_by_area: dict[str, list] = {}
    outside = 0
    duplicates = 0
    seen_ids: set[str] = set()
    for doc in ingest(cfg.corpus_path, format=cfg.corpus_format):
        # ids must stay unique corpus-wide, not just within one area
        if doc.id in seen_ids:
            duplicates += 1
            continue
        seen_ids.add(doc.id)
        if doc.area_label is not None:
            area = doc.area_label if doc.area_label in assignment.area_labels else None
        elif doc.latitude is not None and doc.longitude is not None:
            code = index.assign(doc.latitude, doc.longitude, cfg.radius_km)
            area = assignment.airport_to_area.get(code) if code else None
            if area == NOISE_AREA:
                area = None
        else:
            area = None
        if area is None:
            outside += 1
            continue
        docs_by_area.setdefault(area, []).append(doc)

    stats = SamplerStats()
    samples = []
    for area in sorted(docs_by_area):
        country, region = assignment.area_labels[area]
        location = LocationLabels(area=area, country=country, region=region)
        samples.extend(build_samples(docs_by_area[area], keywords, location, stats))
    save_sample_manifest(samples, cfg.run_dir / "samples.jsonl")
    _update_meta(cfg.run_dir, config_hash=cfg.hash())
    print(
        f"sample: {len(samples)} samples across {len(docs_by_area)} areas "
        f"({stats.sampled_documents} docs used, {stats.discarded_no_keyword} "
        f"no-keyword, {stats.dropped_incomplete} dropped, {outside} outside areas, "
        f"{duplicates + stats.duplicate_ids} duplicate ids)"
    )
    return 0


def _features_prefix(cfg: RunConfig) -> Path:
    return cfg.run_dir / f"features_{cfg.stage}"


def _cmd_features(cfg: RunConfig) -> int:
    cfg.require(
        corpus_path="corpus",
        grammar_path="grammar file",
        categories_path="category inventory",
        syn_path="syn embedding table",
        sem_path="sem embedding table",
    )
    samples_path = _need(cfg.run_dir / "samples.jsonl", "sample")
    samples = load_sample_manifest(samples_path)
    if not samples:
        raise ConfigError("sample manifest is empty")

    inventory = load_categories(cfg.categories_path)
    full_grammar = parse_grammar(cfg.grammar_path, inventory)
    grammar = filter_by_stage(full_grammar, cfg.stage)
    if len(grammar) == 0:
        raise ConfigError(f"grammar has no {cfg.stage}-stage constructions")
    tables = {
        "syn": load_embeddings(cfg.syn_path, "syn"),
        "sem": load_embeddings(cfg.sem_path, "sem"),
    }
    needed = {doc_id for s in samples for doc_id in s.documents}
    documents: dict[str, list[str]] = {}
    for doc in ingest(cfg.corpus_path, format=cfg.corpus_format):
        if doc.id in needed:
            documents[doc.id] = tokenize(doc.text)

    engine = MatchEngine(grammar, tables, inventory)
    fm = build_matrix(
        samples,
        documents,
        engine,
        normalization=cfg.normalization,
        binary=cfg.binary,
        threads=cfg.threads,
    )
    fm.save(_features_prefix(cfg))

    split_path = cfg.run_dir / "split.json"
    if split_path.is_file():
        split = SplitSpec.load(split_path)
        if len(split.train) + len(split.test) != len(samples):
            raise ConfigError(
                f"{split_path} covers {len(split.train) + len(split.test)} samples "
                f"but the manifest has {len(samples)}; delete it to re-split"
            )
    else:
        split = make_split(fm.labels["area"], cfg.seed)
        split.save(split_path)
    _update_meta(
        cfg.run_dir,
        config_hash=cfg.hash(),
        grammar_hash=grammar_hash(full_grammar),
        split_hash=split.hash(),
        seed=cfg.seed,
    )
    print(
        f"features: {fm.matrix.shape[0]} samples x {fm.matrix.shape[1]} "
        f"constructions ({cfg.stage} stage)"
    )
    return 0


def _load_features(cfg: RunConfig) -> FeatureMatrix:
    prefix = _features_prefix(cfg)
    _need(prefix.with_suffix(".json"), "features")
    _need(prefix.with_suffix(".npy"), "features")
    return FeatureMatrix.load(prefix)


def _load_split(cfg: RunConfig) -> SplitSpec:
    return SplitSpec.load(_need(cfg.run_dir / "split.json", "features"))


def _region_rows(fm: FeatureMatrix, region: str) -> list[int]:
    return [i for i, r in enumerate(fm.labels["region"]) if r == region]


def _sub_split(split: SplitSpec, rows: list[int]) -> SplitSpec:
    pos = {row: p for p, row in enumerate(rows)}
    return SplitSpec(
        seed=split.seed,
        train_fraction=split.train_fraction,
        train=tuple(pos[i] for i in split.train if i in pos),
        test=tuple(pos[i] for i in split.test if i in pos),
    )


def _local_skip_reason(fm: FeatureMatrix, split: SplitSpec, region: str) -> str | None:
    rows = _region_rows(fm, region)
    sub = _sub_split(split, rows)
    areas = [fm.labels["area"][rows[p]] for p in sub.train]
    if len(set(areas)) < 2:
        return "single area in training rows"
    if not sub.test:
        return "no test rows"
    return None


def _model_prefix(cfg: RunConfig, region: str | None = None) -> Path:
    models = cfg.run_dir / "models"
    models.mkdir(exist_ok=True)
    if region is None:
        return models / f"{cfg.granularity}_{cfg.stage}"
    return models / f"local_{region}_{cfg.stage}"


def _cmd_train(cfg: RunConfig) -> int:
    fm = _load_features(cfg)
    split = _load_split(cfg)
    if cfg.granularity in ("region", "country"):
        y = fm.labels[cfg.granularity]
        model = train_model(
            fm.matrix,
            y,
            split,
            C=cfg.C,
            epochs=cfg.epochs,
            seed=cfg.seed,
            feature_ids=fm.construction_ids,
        )
        model.save(_model_prefix(cfg))
        print(
            f"train: {cfg.granularity}/{cfg.stage} model, "
            f"{len(model.classes)} classes, {fm.matrix.shape[1]} features"
        )
        return 0
    trained, skipped = 0, 0
    for region in sorted(set(fm.labels["region"])):
        if _local_skip_reason(fm, split, region) is not None:
            skipped += 1
            continue
        rows = _region_rows(fm, region)
        model = train_model(
            fm.matrix[rows],
            [fm.labels["area"][i] for i in rows],
            _sub_split(split, rows),
            C=cfg.C,
            epochs=cfg.epochs,
            seed=cfg.seed,
            feature_ids=fm.construction_ids,
        )
        model.save(_model_prefix(cfg, region))
        trained += 1
    print(f"train: {trained} local/{cfg.stage} models ({skipped} regions skipped)")
    return 0


def _cmd_evaluate(cfg: RunConfig) -> int:
    fm = _load_features(cfg)
    split = _load_split(cfg)
    metrics_dir = cfg.run_dir / "metrics"
    confusion_dir = cfg.run_dir / "confusion"
    metrics_dir.mkdir(exist_ok=True)
    confusion_dir.mkdir(exist_ok=True)
    test_idx = np.array(split.test, dtype=int)

    def _emit(name: str, model: LinearModel, X, y) -> Metrics:
        m = evaluate_model(model, X, y)
        _write_csv(metrics_dir / f"{name}.csv", m.to_csv_rows())
        payload = m.to_json_dict()
        payload["split_hash"] = split.hash()
        _write_json(confusion_dir / f"{name}.json", payload)
        return m

    if cfg.granularity in ("region", "country"):
        prefix = _model_prefix(cfg)
        _need(prefix.with_suffix(".json"), "train")
        model = LinearModel.load(prefix)
        y = fm.labels[cfg.granularity]
        m = _emit(
            f"{cfg.granularity}_{cfg.stage}",
            model,
            fm.matrix[test_idx],
            [y[i] for i in test_idx],
        )
        print(
            f"evaluate: {cfg.granularity}/{cfg.stage} weighted "
            f"P={m.weighted_precision:.4f} R={m.weighted_recall:.4f} "
            f"F={m.weighted_f:.4f} (n={m.total})"
        )
        return 0
    lines = []
    for region in sorted(set(fm.labels["region"])):
        if _local_skip_reason(fm, split, region) is not None:
            continue
        prefix = _model_prefix(cfg, region)
        _need(prefix.with_suffix(".json"), "train")
        model = LinearModel.load(prefix)
        rows = _region_rows(fm, region)
        sub = _sub_split(split, rows)
        sub_test = [rows[p] for p in sub.test]
        m = _emit(
            f"local_{region}_{cfg.stage}",
            model,
            fm.matrix[sub_test],
            [fm.labels["area"][i] for i in sub_test],
        )
        lines.append(f"{region} F={m.weighted_f:.4f}")
    print(f"evaluate: local/{cfg.stage} " + ", ".join(lines))
    return 0


def _nodes_name(cfg: RunConfig, region: str | None = None) -> str:
    if region is None:
        return f"{cfg.granularity}_{cfg.stage}"
    return f"local_{region}_{cfg.stage}"


def _restrict_rows(fm: FeatureMatrix, rows: list[int]) -> FeatureMatrix:
    return FeatureMatrix(
        matrix=fm.matrix[rows],
        sample_ids=[fm.sample_ids[i] for i in rows],
        construction_ids=fm.construction_ids,
        labels={k: [v[i] for i in rows] for k, v in fm.labels.items()},
        meta=dict(fm.meta),
    )


def _emit_scan(cfg: RunConfig, name: str, scan: NodeScanResult) -> None:
    nodes_dir = cfg.run_dir / "nodes"
    confusion_dir = cfg.run_dir / "confusion"
    nodes_dir.mkdir(exist_ok=True)
    confusion_dir.mkdir(exist_ok=True)
    rows = [["node_kind", "node_id", "stage", "n_constructions", "degenerate", "weighted_f"]]
    for nr in scan.nodes:
        rows.append(
            [
                nr.node.kind,
                nr.node.id,
                nr.stage,
                str(nr.n_constructions),
                "1" if nr.degenerate else "0",
                f"{nr.weighted_f:.6f}",
            ]
        )
    rows.append(["baseline", "full_grammar", scan.stage, "", "", f"{scan.full.weighted_f:.6f}"])
    rows.append(["baseline", "majority_share", scan.stage, "", "", f"{scan.majority_share:.6f}"])
    _write_csv(nodes_dir / f"{name}.csv", rows)
    payload = {
        "split_hash": scan.split_hash,
        "granularity": scan.granularity,
        "stage": scan.stage,
        "majority_share": round(scan.majority_share, 12),
        "full": scan.full.to_json_dict(),
        "nodes": {
            f"{nr.node.kind}:{nr.node.id}": {
                "classes": nr.metrics.classes,
                "confusion": nr.metrics.confusion.tolist(),
                "degenerate": nr.degenerate,
                "weighted_f": round(nr.weighted_f, 12),
            }
            for nr in scan.nodes
        },
    }
    _write_json(confusion_dir / f"nodes_{name}.json", payload)


def _cmd_node_scan(cfg: RunConfig) -> int:
    cfg.require(grammar_path="grammar file", categories_path="category inventory")
    fm = _load_features(cfg)
    split = _load_split(cfg)
    inventory = load_categories(cfg.categories_path)
    grammar = filter_by_stage(parse_grammar(cfg.grammar_path, inventory), cfg.stage)
    if cfg.granularity in ("region", "country"):
        scan = node_scan(
            fm,
            cfg.granularity,
            split,
            grammar,
            stage=cfg.stage,
            C=cfg.C,
            epochs=cfg.epochs,
            seed=cfg.seed,
            threads=cfg.threads,
        )
        _emit_scan(cfg, _nodes_name(cfg), scan)
        best = max((nr.weighted_f for nr in scan.nodes), default=0.0)
        print(
            f"node-scan: {len(scan.nodes)} nodes ({cfg.granularity}/{cfg.stage}), "
            f"full F={scan.full.weighted_f:.4f}, best node F={best:.4f}"
        )
        return 0
    scanned = 0
    for region in sorted(set(fm.labels["region"])):
        if _local_skip_reason(fm, split, region) is not None:
            continue
        rows = _region_rows(fm, region)
        scan = node_scan(
            _restrict_rows(fm, rows),
            "area",
            _sub_split(split, rows),
            grammar,
            stage=cfg.stage,
            C=cfg.C,
            epochs=cfg.epochs,
            seed=cfg.seed,
            threads=cfg.threads,
        )
        _emit_scan(cfg, _nodes_name(cfg, region), scan)
        scanned += 1
    print(f"node-scan: {scanned} local scans ({cfg.stage} stage)")
    return 0


def _cmd_unmask(cfg: RunConfig) -> int:
    if cfg.granularity == "local":
        raise ConfigError("unmask runs at region or country granularity")
    fm = _load_features(cfg)
    split = _load_split(cfg)
    curve = unmask(
        fm,
        cfg.granularity,
        split,
        rounds=cfg.rounds,
        remove_per_class_per_round=cfg.remove_per_class,
        C=cfg.C,
        epochs=cfg.epochs,
        seed=cfg.seed,
    )
    rows = [["granularity", "stage", "round", "weighted_f", "removed_ids", "split_hash"]]
    for r in curve.rounds:
        rows.append(
            [
                cfg.granularity,
                cfg.stage,
                str(r.round),
                f"{r.weighted_f:.6f}",
                ";".join(str(i) for i in r.removed),
                curve.split_hash,
            ]
        )
    _write_csv(cfg.run_dir / "unmasking.csv", rows)
    removed = curve.cumulative_removed()[-1] if curve.rounds else 0
    final_f = curve.rounds[-1].weighted_f if curve.rounds else 0.0
    print(
        f"unmask: {len(curve.rounds)} rounds ({cfg.granularity}/{cfg.stage}), "
        f"removed {removed}/{fm.matrix.shape[1]} features, final F={final_f:.4f}"
    )
    return 0


def _similarity_from_json(entry: dict) -> SimilarityVector:
    metrics = Metrics.from_confusion(entry["classes"], np.array(entry["confusion"]))
    return error_similarity(metrics)


def _cmd_error_corr(cfg: RunConfig) -> int:
    if cfg.granularity == "local":
        raise ConfigError("error-corr runs at region or country granularity")
    confusion_dir = cfg.run_dir / "confusion"
    ref_path = _need(
        confusion_dir / f"nodes_{cfg.granularity}_late.json", "node-scan --stage late"
    )
    ref_data = json.loads(ref_path.read_text(encoding="utf-8"))
    reference = _similarity_from_json(ref_data["full"])

    nodes_path = _need(
        confusion_dir / f"nodes_{cfg.granularity}_{cfg.stage}.json",
        f"node-scan --stage {cfg.stage}",
    )
    data = json.loads(nodes_path.read_text(encoding="utf-8"))
    vectors = {key: _similarity_from_json(entry) for key, entry in data["nodes"].items()}
    corrs = similarity_correlation(vectors, reference, method=cfg.correlation)

    sim_dir = cfg.run_dir / "similarity"
    sim_dir.mkdir(exist_ok=True)
    ref_rows = [["dialect_a", "dialect_b", "error_share"]]
    for (a, b), share in zip(reference.pairs, reference.shares):
        ref_rows.append([a, b, f"{share:.6f}"])
    _write_csv(sim_dir / f"reference_{cfg.granularity}.csv", ref_rows)

    corr_rows = [["node_kind", "node_id", "correlation"]]
    for key in sorted(corrs):
        kind, _, node_id = key.partition(":")
        v = corrs[key]
        corr_rows.append([kind, node_id, "" if v is None else f"{v:.6f}"])
    _write_csv(sim_dir / f"correlations_{cfg.granularity}_{cfg.stage}.csv", corr_rows)

    summaries = {
        kind: summarize_correlations(
            [v for key, v in corrs.items() if key.startswith(kind + ":")]
        )
        for kind in ("micro", "macro")
    }
    cols = ["kind", "count", "missing", "min", "q25", "median", "q75", "max"]
    sum_rows = [cols]
    for kind in sorted(summaries):
        s = summaries[kind]
        sum_rows.append(
            [kind, str(s.get("count", 0)), str(s.get("missing", 0))]
            + [f"{s[c]:.6f}" if c in s else "" for c in cols[3:]]
        )
    _write_csv(sim_dir / f"summary_{cfg.granularity}_{cfg.stage}.csv", sum_rows)
    medians = {
        kind: f"{summaries[kind]['median']:.4f}" if "median" in summaries[kind] else "n/a"
        for kind in sorted(summaries)
    }
    print(
        f"error-corr: {len(corrs)} nodes ({cfg.granularity}/{cfg.stage}), "
        + ", ".join(f"{k} median r={v}" for k, v in medians.items())
    )
    return 0


def _cmd_report(cfg: RunConfig) -> int:
    figures = cfg.run_dir / "figures"
    figures.mkdir(exist_ok=True)
    written = 0

    nodes_dir = cfg.run_dir / "nodes"
    node_files = sorted(nodes_dir.glob("*.csv")) if nodes_dir.is_dir() else []
    if not node_files:
        render_node_scatter([], None, None, figures / "nodes.svg", figures / "nodes.csv")
        written += 1
    for path in node_files:
        rows, full_f, majority = [], None, None
        with path.open("r", encoding="utf-8", newline="") as fh:
            for rec in csv.DictReader(fh):
                if rec["node_kind"] == "baseline":
                    if rec["node_id"] == "full_grammar":
                        full_f = float(rec["weighted_f"])
                    else:
                        majority = float(rec["weighted_f"])
                    continue
                rows.append(
                    {
                        "node_kind": rec["node_kind"],
                        "node_id": rec["node_id"],
                        "n_constructions": int(rec["n_constructions"]),
                        "degenerate": rec["degenerate"] == "1",
                        "weighted_f": float(rec["weighted_f"]),
                    }
                )
        render_node_scatter(
            rows,
            full_f,
            majority,
            figures / f"nodes_{path.stem}.svg",
            figures / f"nodes_{path.stem}.csv",
            title=f"Predictive power per grammar node ({path.stem})",
        )
        written += 1

    unmask_path = cfg.run_dir / "unmasking.csv"
    rows = []
    if unmask_path.is_file():
        with unmask_path.open("r", encoding="utf-8", newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.append(
                    {
                        "granularity": rec["granularity"],
                        "stage": rec["stage"],
                        "round": int(rec["round"]),
                        "weighted_f": float(rec["weighted_f"]),
                        "removed": len([x for x in rec["removed_ids"].split(";") if x]),
                    }
                )
    render_unmasking(rows, figures / "unmasking.svg", figures / "unmasking.csv")
    written += 1

    sim_dir = cfg.run_dir / "similarity"
    summary_files = sorted(sim_dir.glob("summary_*.csv")) if sim_dir.is_dir() else []
    if not summary_files:
        render_correlation_summary(
            {}, figures / "similarity.svg", figures / "similarity.csv"
        )
        written += 1
    for path in summary_files:
        summaries: dict[str, dict] = {}
        with path.open("r", encoding="utf-8", newline="") as fh:
            for rec in csv.DictReader(fh):
                s: dict = {"count": int(rec["count"]), "missing": int(rec["missing"])}
                for c in ("min", "q25", "median", "q75", "max"):
                    if rec[c]:
                        s[c] = float(rec[c])
                summaries[rec["kind"]] = s
        name = path.stem.removeprefix("summary_")
        render_correlation_summary(
            summaries,
            figures / f"similarity_{name}.svg",
            figures / f"similarity_{name}.csv",
            title=f"Error-similarity correlation ({name})",
        )
        written += 1
    print(f"report: {written} figures in {figures}")
    return 0


_COMMANDS = {
    "areas": _cmd_areas,
    "sample": _cmd_sample,
    "features": _cmd_features,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "node-scan": _cmd_node_scan,
    "unmask": _cmd_unmask,
    "error-corr": _cmd_error_corr,
    "report": _cmd_report,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gramvar",
        description="Dialect classification from construction-grammar features.",
    )
    parser.add_argument("--config", default="gramvar.ini", help="run configuration file")
    parser.add_argument("--run-dir", help="override the run directory")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--stage", choices=["early", "late"], help="grammar stage")
    parser.add_argument(
        "--granularity", choices=["region", "country", "local"], help="label granularity"
    )
    parser.add_argument("--threads", type=int, help="worker threads for matching/scans")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sub.add_parser(name, help=f"run the {name} step")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.run_dir is not None:
            cfg.run_dir = Path(args.run_dir)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.stage is not None:
            cfg.stage = args.stage
        if args.granularity is not None:
            cfg.granularity = args.granularity
        if args.threads is not None:
            cfg.threads = args.threads
        cfg.validate()
        if cfg.run_dir is None:
            raise ConfigError("no run directory: set [run] dir or pass --run-dir")
        cfg.run_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg)
    except MissingArtifact as exc:
        print(f"error: missing artifact: {exc}", file=sys.stderr)
        return 3
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
