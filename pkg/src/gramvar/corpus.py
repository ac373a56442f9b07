"""Corpus ingestion, tokenization, and lexically-balanced sample assembly.

Documents are geo-referenced short texts. A sample is a sub-corpus holding
exactly one document per keyword, so every sample has the same keyword
distribution regardless of where it was collected.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

logger = logging.getLogger(__name__)


class CorpusError(Exception):
    """Fatal problem with a corpus, keyword, or manifest file."""


@dataclass(frozen=True)
class Document:
    """One geo-referenced post. Coordinates may be absent when an area label
    was assigned upstream."""

    id: str
    text: str
    latitude: float | None = None
    longitude: float | None = None
    area_label: str | None = None


@dataclass
class IngestStats:
    records: int = 0
    yielded: int = 0
    skipped: int = 0


# Markup handling: URLs and @-mentions are dropped entirely, hashtags keep
# their body. Word-internal apostrophes stay inside the token so contractions
# ("won't") cannot shed a spurious keyword ("won"). Everything else that is
# neither word nor whitespace becomes a one-character punctuation token.
_URL = re.compile(r"https?://\S+|www\.\S+")
_MENTION = re.compile(r"@\w+")
_HASHTAG = re.compile(r"#(\w+)")
_TOKEN = re.compile(r"\w+(?:'\w+)*|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase and split ``text`` into word and punctuation tokens."""
    text = text.lower()
    text = _URL.sub(" ", text)
    text = _MENTION.sub(" ", text)
    text = _HASHTAG.sub(r"\1", text)
    return _TOKEN.findall(text)


def _valid_coord(lat: float, lon: float) -> bool:
    return -90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0


def ingest(
    path: str | Path,
    format: str = "jsonl",
    stats: IngestStats | None = None,
) -> Iterator[Document]:
    """Stream documents from a newline-delimited record file.

    Records need ``id``, ``text``, and either valid ``lat``/``lon`` or a
    precomputed ``area``. Malformed records are counted in ``stats.skipped``
    and dropped; an unreadable file raises.
    """
    if format != "jsonl":
        raise CorpusError(f"unsupported corpus format: {format!r}")
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    if stats is None:
        stats = IngestStats()

    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            stats.records += 1
            doc = _parse_record(line)
            if doc is None:
                stats.skipped += 1
                continue
            stats.yielded += 1
            yield doc
    if stats.skipped:
        logger.warning("ingest: skipped %d malformed record(s)", stats.skipped)


def _parse_record(line: str) -> Document | None:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(rec, dict):
        return None
    text = rec.get("text")
    doc_id = rec.get("id")
    if doc_id is None or not isinstance(text, str) or not text.strip():
        return None
    area = rec.get("area")
    lat, lon = rec.get("lat"), rec.get("lon")
    if lat is None or lon is None:
        if area is None:
            return None
        lat = lon = None
    else:
        try:
            lat, lon = float(lat), float(lon)
        except (TypeError, ValueError):
            return None
        if not _valid_coord(lat, lon):
            return None
    return Document(
        id=str(doc_id), text=text, latitude=lat, longitude=lon,
        area_label=str(area) if area is not None else None,
    )


class KeywordSet:
    """Ordered set of lowercase lexemes used to balance samples."""

    def __init__(self, keywords: Iterable[str]):
        kws = tuple(keywords)
        index: dict[str, int] = {}
        for i, kw in enumerate(kws):
            if kw != kw.lower():
                raise CorpusError(f"keyword not lowercase: {kw!r}")
            if not kw:
                raise CorpusError("empty keyword")
            if kw in index:
                raise CorpusError(f"duplicate keyword: {kw!r}")
            index[kw] = i
        self.keywords = kws
        self._index = index

    @classmethod
    def from_file(cls, path: str | Path) -> "KeywordSet":
        """Load one lexeme per line; blank lines ignored, case folded."""
        path = Path(path)
        if not path.is_file():
            raise CorpusError(f"keyword file not found: {path}")
        words = [w.strip().lower() for w in path.read_text(encoding="utf-8").splitlines()]
        return cls(w for w in words if w)

    def __len__(self) -> int:
        return len(self.keywords)

    def __iter__(self):
        return iter(self.keywords)

    def __contains__(self, kw: object) -> bool:
        return kw in self._index

    def first_match_index(self, tokens: Sequence[str]) -> int | None:
        """Index of the first keyword (in set order) present in ``tokens``."""
        best: int | None = None
        for tok in tokens:
            i = self._index.get(tok)
            if i is not None and (best is None or i < best):
                best = i
        return best

    def first_match(self, tokens: Sequence[str]) -> str | None:
        i = self.first_match_index(tokens)
        return None if i is None else self.keywords[i]


def default_keywords() -> KeywordSet:
    """The keyword inventory shipped with the package."""
    text = resources.files("gramvar.data").joinpath("keywords.txt").read_text("utf-8")
    return KeywordSet(w for w in (line.strip() for line in text.splitlines()) if w)


def contains_keyword(doc: Document, keywords: KeywordSet) -> str | None:
    """First keyword (in keyword order) whose exact token form occurs in the
    document, or None; keyword-free documents are discarded from sampling."""
    return keywords.first_match(tokenize(doc.text))


@dataclass(frozen=True)
class LocationLabels:
    """Label triple shared by every sample built from one stream."""

    area: str
    country: str
    region: str


@dataclass(frozen=True)
class Sample:
    id: str
    area_label: str
    country_label: str
    region_label: str
    documents: tuple[str, ...]  # doc ids, position k covers keyword k
    token_count: int


@dataclass
class SamplerStats:
    """Accounting for the discard rule: every ingested document lands in
    exactly one of sampled / discarded / dropped-incomplete (plus a separate
    duplicate-id bucket, zero on id-unique streams)."""

    ingested: int = 0
    sampled_documents: int = 0
    discarded_no_keyword: int = 0
    dropped_incomplete: int = 0
    duplicate_ids: int = 0


class _OpenSample:
    __slots__ = ("docs", "filled", "tokens")

    def __init__(self, n_keywords: int):
        self.docs: list[str | None] = [None] * n_keywords
        self.filled = 0
        self.tokens = 0


def build_samples(
    docs: Iterable[Document],
    keywords: KeywordSet,
    location: LocationLabels,
    stats: SamplerStats | None = None,
) -> list[Sample]:
    """Greedy first-fit assembly of keyword-balanced samples.

    Each document fills the first open sample still missing its matched
    keyword; a sample closes once every keyword is covered. Incomplete
    samples at end of stream are dropped. Deterministic in stream order.
    """
    if stats is None:
        stats = SamplerStats()
    n_kw = len(keywords)
    if n_kw == 0:
        raise CorpusError("empty keyword set")
    open_samples: list[_OpenSample] = []
    seen_ids: set[str] = set()
    out: list[Sample] = []

    for doc in docs:
        stats.ingested += 1
        if doc.id in seen_ids:
            stats.duplicate_ids += 1
            continue
        seen_ids.add(doc.id)
        tokens = tokenize(doc.text)
        slot = keywords.first_match_index(tokens)
        if slot is None:
            stats.discarded_no_keyword += 1
            continue
        for open_s in open_samples:
            if open_s.docs[slot] is None:
                break
        else:
            open_s = _OpenSample(n_kw)
            open_samples.append(open_s)
        open_s.docs[slot] = doc.id
        open_s.filled += 1
        open_s.tokens += len(tokens)
        if open_s.filled == n_kw:
            open_samples.remove(open_s)
            stats.sampled_documents += n_kw
            out.append(Sample(
                id=f"{location.area}-{len(out) + 1:05d}",
                area_label=location.area,
                country_label=location.country,
                region_label=location.region,
                documents=tuple(open_s.docs),  # type: ignore[arg-type]
                token_count=open_s.tokens,
            ))

    for open_s in open_samples:
        stats.dropped_incomplete += open_s.filled
    return out


def save_sample_manifest(samples: Sequence[Sample], path: str | Path) -> None:
    """One JSON record per sample: labels, token count, member doc ids."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in samples:
            rec = {
                "id": s.id,
                "area": s.area_label,
                "country": s.country_label,
                "region": s.region_label,
                "token_count": s.token_count,
                "documents": list(s.documents),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_sample_manifest(path: str | Path) -> list[Sample]:
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"sample manifest not found: {path}")
    samples = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        samples.append(Sample(
            id=rec["id"],
            area_label=rec["area"],
            country_label=rec["country"],
            region_label=rec["region"],
            documents=tuple(rec["documents"]),
            token_count=int(rec["token_count"]),
        ))
    return samples
