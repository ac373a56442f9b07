"""Run configuration: one INI file, sections mirroring module names.

Command-line flags override individual fields. Paths are resolved
relative to the config file so fixture trees stay relocatable.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .experiments import GRANULARITIES
from .grammar import STAGES
from .matcher import NORMALIZATIONS


class ConfigError(Exception):
    """Invalid or incomplete run configuration."""


@dataclass
class RunConfig:
    # corpus
    corpus_path: Path | None = None
    keywords_path: Path | None = None  # None -> bundled default list
    corpus_format: str = "jsonl"
    # geo
    airports_path: Path | None = None
    overrides_path: Path | None = None
    regions_path: Path | None = None
    radius_km: float = 25.0
    min_cluster_size: int = 3
    leaf: bool = False
    # grammar
    grammar_path: Path | None = None
    categories_path: Path | None = None
    # embeddings
    syn_path: Path | None = None
    sem_path: Path | None = None
    # matcher
    normalization: str = "per_token"
    binary: bool = False
    # classifier
    C: float = 1.0
    epochs: int = 20
    # unmasking
    rounds: int = 500
    remove_per_class: int | None = None
    # experiments
    correlation: str = "pearson"
    # run
    run_dir: Path | None = None
    seed: int = 0
    stage: str = "late"
    granularity: str = "region"
    threads: int = 1
    source: Path | None = field(default=None, repr=False)

    def validate(self) -> None:
        if self.corpus_format != "jsonl":
            raise ConfigError(f"unsupported corpus format {self.corpus_format!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        if self.stage not in STAGES:
            raise ConfigError(f"unknown stage {self.stage!r}")
        if self.granularity not in GRANULARITIES:
            raise ConfigError(f"unknown granularity {self.granularity!r}")
        if self.correlation not in ("pearson", "spearman"):
            raise ConfigError(f"unknown correlation {self.correlation!r}")
        if self.C <= 0:
            raise ConfigError("C must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.rounds < 0:
            raise ConfigError("rounds must be non-negative")
        if self.remove_per_class is not None and self.remove_per_class < 1:
            raise ConfigError("remove_per_class must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.min_cluster_size < 2:
            raise ConfigError("min_cluster_size must be at least 2")
        if self.radius_km <= 0:
            raise ConfigError("radius_km must be positive")

    def require(self, **fields: str) -> None:
        """Check that named path fields are set and exist on disk."""
        for attr, what in fields.items():
            path: Path | None = getattr(self, attr)
            if path is None:
                raise ConfigError(f"config is missing the {what} path")
            if not path.exists():
                raise ConfigError(f"{what} not found: {path}")

    def hash(self) -> str:
        # identity of the run's result-affecting inputs: where outputs land
        # (run_dir) and how many workers ran (threads) must not change it
        skip = {"source", "run_dir", "threads"}
        d = {
            k: (str(v) if isinstance(v, Path) else v)
            for k, v in vars(self).items()
            if k not in skip
        }
        return hashlib.sha256(
            json.dumps(d, sort_keys=True).encode("utf-8")
        ).hexdigest()


def _path(base: Path, value: str) -> Path | None:
    value = value.strip()
    if not value:
        return None
    p = Path(value)
    return p if p.is_absolute() else (base / p)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    base = path.parent
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    cfg = RunConfig(source=path)
    try:
        if parser.has_section("corpus"):
            s = parser["corpus"]
            cfg.corpus_path = _path(base, s.get("path", ""))
            cfg.keywords_path = _path(base, s.get("keywords", ""))
            cfg.corpus_format = s.get("format", cfg.corpus_format).strip()
        if parser.has_section("geo"):
            s = parser["geo"]
            cfg.airports_path = _path(base, s.get("airports", ""))
            cfg.overrides_path = _path(base, s.get("overrides", ""))
            cfg.regions_path = _path(base, s.get("regions", ""))
            cfg.radius_km = s.getfloat("radius_km", cfg.radius_km)
            cfg.min_cluster_size = s.getint("min_cluster_size", cfg.min_cluster_size)
            cfg.leaf = s.getboolean("leaf", cfg.leaf)
        if parser.has_section("grammar"):
            s = parser["grammar"]
            cfg.grammar_path = _path(base, s.get("path", ""))
            cfg.categories_path = _path(base, s.get("categories", ""))
        if parser.has_section("embeddings"):
            s = parser["embeddings"]
            cfg.syn_path = _path(base, s.get("syn", ""))
            cfg.sem_path = _path(base, s.get("sem", ""))
        if parser.has_section("matcher"):
            s = parser["matcher"]
            cfg.normalization = s.get("normalization", cfg.normalization).strip()
            cfg.binary = s.getboolean("binary", cfg.binary)
        if parser.has_section("classifier"):
            s = parser["classifier"]
            cfg.C = s.getfloat("c", s.getfloat("C", cfg.C))
            cfg.epochs = s.getint("epochs", cfg.epochs)
        if parser.has_section("unmasking"):
            s = parser["unmasking"]
            cfg.rounds = s.getint("rounds", cfg.rounds)
            raw = s.get("remove_per_class", "").strip()
            cfg.remove_per_class = int(raw) if raw else None
        if parser.has_section("experiments"):
            s = parser["experiments"]
            cfg.correlation = s.get("correlation", cfg.correlation).strip()
        if parser.has_section("run"):
            s = parser["run"]
            cfg.run_dir = _path(base, s.get("dir", ""))
            cfg.seed = s.getint("seed", cfg.seed)
            cfg.stage = s.get("stage", cfg.stage).strip()
            cfg.granularity = s.get("granularity", cfg.granularity).strip()
            cfg.threads = s.getint("threads", cfg.threads)
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    return cfg
