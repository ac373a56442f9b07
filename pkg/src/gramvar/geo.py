"""Airport proxies and density-based local dialect areas.

Documents are attached to their nearest airport within a fixed radius; the
airports of each country are then clustered into contiguous local areas with
HDBSCAN over great-circle distances. Manual overrides patch up noise or
borderline assignments afterwards.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.cluster import HDBSCAN

from .corpus import Document

EARTH_RADIUS_KM = 6371.0088
DEFAULT_RADIUS_KM = 25.0
NOISE_AREA = "noise"


class GeoError(Exception):
    """Fatal problem with airport, override, or area manifest data."""


@dataclass(frozen=True)
class Airport:
    code: str
    latitude: float
    longitude: float
    country: str


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometers."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlam / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def load_airports(path: str | Path) -> list[Airport]:
    """CSV inventory with columns code, lat, lon, country."""
    path = Path(path)
    if not path.is_file():
        raise GeoError(f"airport inventory not found: {path}")
    airports: list[Airport] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            code = row["code"].strip()
            if code in seen:
                raise GeoError(f"duplicate airport code: {code}")
            seen.add(code)
            lat, lon = float(row["lat"]), float(row["lon"])
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                raise GeoError(f"invalid coordinates for airport {code}")
            airports.append(Airport(code, lat, lon, row["country"].strip()))
    return airports


def assign_to_airport(
    doc: Document,
    airports: Sequence[Airport],
    radius_km: float = DEFAULT_RADIUS_KM,
) -> str | None:
    """Code of the nearest airport within ``radius_km``, else None.

    Documents beyond the radius are excluded from local-dialect corpora.
    Ties resolve to the earliest airport in the list.
    """
    if not airports:
        raise GeoError("empty airport inventory")
    if doc.latitude is None or doc.longitude is None:
        return None
    best_code, best_dist = None, math.inf
    for ap in airports:
        d = haversine_km(doc.latitude, doc.longitude, ap.latitude, ap.longitude)
        if d < best_dist:
            best_code, best_dist = ap.code, d
    return best_code if best_dist <= radius_km else None


class AirportIndex:
    """Vectorized nearest-airport lookup for bulk assignment."""

    def __init__(self, airports: Sequence[Airport]):
        if not airports:
            raise GeoError("empty airport inventory")
        self.airports = list(airports)
        self._codes = [ap.code for ap in airports]
        self._lat = np.radians(np.array([ap.latitude for ap in airports]))
        self._lon = np.radians(np.array([ap.longitude for ap in airports]))

    def assign(self, lat: float, lon: float, radius_km: float = DEFAULT_RADIUS_KM) -> str | None:
        phi = math.radians(lat)
        lam = math.radians(lon)
        a = (
            np.sin((self._lat - phi) / 2) ** 2
            + math.cos(phi) * np.cos(self._lat) * np.sin((self._lon - lam) / 2) ** 2
        )
        d = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(a)))
        i = int(np.argmin(d))
        return self._codes[i] if d[i] <= radius_km else None


def _haversine_matrix(lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    phi = np.radians(lats)[:, None]
    lam = np.radians(lons)[:, None]
    a = (
        np.sin((phi - phi.T) / 2) ** 2
        + np.cos(phi) * np.cos(phi.T) * np.sin((lam - lam.T) / 2) ** 2
    )
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(a)))


@dataclass
class AreaAssignment:
    """Mapping of airports into local dialect areas.

    ``airport_to_area`` covers every airport (value NOISE_AREA when
    unclustered); ``area_labels`` maps each real area to its (country,
    region) pair."""

    airport_to_area: dict[str, str]
    area_labels: dict[str, tuple[str, str]]
    airports: dict[str, Airport] = field(default_factory=dict)

    def areas(self) -> list[str]:
        return sorted(self.area_labels)

    def members(self, area_id: str) -> list[str]:
        return sorted(c for c, a in self.airport_to_area.items() if a == area_id)


def cluster_airports(
    airports: Sequence[Airport],
    min_cluster_size: int = 3,
    *,
    min_samples: int | None = None,
    leaf: bool = False,
    regions: Mapping[str, str] | None = None,
) -> AreaAssignment:
    """Cluster each country's airports into local areas with HDBSCAN.

    Clustering runs independently per country (areas never span countries).
    Countries with fewer than ``min_cluster_size`` airports are all noise.
    Flat clusters come from excess-of-mass stability by default; ``leaf``
    switches to leaf extraction. Area ids are ``{country}-{n}`` numbered by
    each cluster's lexicographically smallest airport code, so the partition
    is stable under input reordering.
    """
    if min_cluster_size < 2:
        raise GeoError("min_cluster_size must be at least 2")
    regions = dict(regions or {})
    by_country: dict[str, list[Airport]] = {}
    for ap in airports:
        by_country.setdefault(ap.country, []).append(ap)
    if regions:
        # a partial region map is almost always a typo in the regions file
        missing = sorted(set(by_country) - set(regions))
        if missing:
            raise GeoError(f"countries missing from region map: {', '.join(missing)}")

    airport_to_area: dict[str, str] = {}
    area_labels: dict[str, tuple[str, str]] = {}
    for country in sorted(by_country):
        group = sorted(by_country[country], key=lambda ap: ap.code)
        region = regions.get(country, country)
        if len(group) < min_cluster_size:
            for ap in group:
                airport_to_area[ap.code] = NOISE_AREA
            continue
        dist = _haversine_matrix(
            np.array([ap.latitude for ap in group]),
            np.array([ap.longitude for ap in group]),
        )
        model = HDBSCAN(
            min_cluster_size=min_cluster_size,
            min_samples=min_samples if min_samples is not None else min_cluster_size,
            metric="precomputed",
            cluster_selection_method="leaf" if leaf else "eom",
            allow_single_cluster=True,
        )
        raw = model.fit_predict(dist)
        # renumber clusters by smallest member code for determinism
        clusters: dict[int, list[Airport]] = {}
        for ap, lbl in zip(group, raw):
            if lbl == -1:
                airport_to_area[ap.code] = NOISE_AREA
            else:
                clusters.setdefault(int(lbl), []).append(ap)
        ordered = sorted(clusters.values(), key=lambda aps: min(ap.code for ap in aps))
        for n, members in enumerate(ordered, start=1):
            area_id = f"{country}-{n}"
            area_labels[area_id] = (country, region)
            for ap in members:
                airport_to_area[ap.code] = area_id

    return AreaAssignment(
        airport_to_area=airport_to_area,
        area_labels=area_labels,
        airports={ap.code: ap for ap in airports},
    )


def load_overrides(path: str | Path) -> list[tuple[str, str]]:
    """Override lines ``airport_code,area_id``; # comments and blanks skipped."""
    path = Path(path)
    if not path.is_file():
        raise GeoError(f"override file not found: {path}")
    out: list[tuple[str, str]] = []
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2 or not all(parts):
            raise GeoError(f"malformed override at line {ln}: {line!r}")
        if not out and [p.lower() for p in parts] == ["code", "area_id"]:
            continue  # optional header row
        out.append((parts[0], parts[1]))
    return out


def apply_overrides(
    assignment: AreaAssignment,
    overrides: str | Path | Iterable[tuple[str, str]],
) -> AreaAssignment:
    """Replace algorithmic area assignments with manual ones.

    Unknown airport codes are a fatal config error. Overrides may adopt noise
    airports into existing areas or name brand-new areas, which inherit the
    airport's country (and its region when the country is already labeled).
    """
    if isinstance(overrides, (str, Path)):
        overrides = load_overrides(overrides)
    airport_to_area = dict(assignment.airport_to_area)
    area_labels = dict(assignment.area_labels)
    country_region = {c: r for c, r in area_labels.values()}
    for code, area_id in overrides:
        if code not in airport_to_area:
            raise GeoError(f"override references unknown airport: {code}")
        airport_to_area[code] = area_id
        if area_id != NOISE_AREA and area_id not in area_labels:
            country = assignment.airports[code].country if code in assignment.airports else ""
            area_labels[area_id] = (country, country_region.get(country, country))
    # drop areas that lost all members
    live = set(airport_to_area.values())
    area_labels = {a: lbl for a, lbl in area_labels.items() if a in live}
    return AreaAssignment(
        airport_to_area=airport_to_area,
        area_labels=area_labels,
        airports=dict(assignment.airports),
    )


def save_area_manifest(assignment: AreaAssignment, path: str | Path) -> None:
    """CSV manifest: airport, coordinates, country, region, area."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["airport", "lat", "lon", "country", "region", "area"])
        for code in sorted(assignment.airport_to_area):
            area = assignment.airport_to_area[code]
            ap = assignment.airports.get(code)
            country = ap.country if ap else ""
            region = assignment.area_labels.get(area, (country, country))[1]
            w.writerow([
                code,
                repr(ap.latitude) if ap else "",
                repr(ap.longitude) if ap else "",
                country,
                region,
                area,
            ])


def load_area_manifest(path: str | Path) -> AreaAssignment:
    path = Path(path)
    if not path.is_file():
        raise GeoError(f"area manifest not found: {path}")
    airport_to_area: dict[str, str] = {}
    area_labels: dict[str, tuple[str, str]] = {}
    airports: dict[str, Airport] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            code, area = row["airport"], row["area"]
            airport_to_area[code] = area
            if row["lat"] and row["lon"]:
                airports[code] = Airport(code, float(row["lat"]), float(row["lon"]), row["country"])
            if area != NOISE_AREA:
                area_labels[area] = (row["country"], row["region"])
    return AreaAssignment(airport_to_area, area_labels, airports)
