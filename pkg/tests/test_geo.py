"""Distance math, airport assignment, and area clustering."""

import math

import numpy as np
import pytest

from gramvar.corpus import Document
from gramvar.geo import (
    DEFAULT_RADIUS_KM,
    EARTH_RADIUS_KM,
    NOISE_AREA,
    Airport,
    AirportIndex,
    GeoError,
    apply_overrides,
    assign_to_airport,
    cluster_airports,
    haversine_km,
    load_airports,
    load_area_manifest,
    load_overrides,
    save_area_manifest,
)


def law_of_cosines_km(lat1, lon1, lat2, lon2):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dl = math.radians(lon2 - lon1)
    c = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return EARTH_RADIUS_KM * math.acos(min(1.0, max(-1.0, c)))


class TestHaversine:
    def test_zero_distance(self):
        assert haversine_km(52.5, 13.4, 52.5, 13.4) == 0.0

    def test_antipodal_on_equator(self):
        d = haversine_km(0.0, 0.0, 0.0, 180.0)
        assert d == pytest.approx(math.pi * EARTH_RADIUS_KM, rel=1e-9)

    def test_berlin_paris_against_law_of_cosines(self):
        # both formulas model the same sphere; at city scale they agree well
        d_h = haversine_km(52.52, 13.405, 48.8566, 2.3522)
        d_c = law_of_cosines_km(52.52, 13.405, 48.8566, 2.3522)
        assert abs(d_h - d_c) / d_c < 1e-3
        assert 800 < d_h < 900

    def test_random_points_against_law_of_cosines(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            lat1, lat2 = rng.uniform(-80, 80, 2)
            lon1, lon2 = rng.uniform(-180, 180, 2)
            d_h = haversine_km(lat1, lon1, lat2, lon2)
            d_c = law_of_cosines_km(lat1, lon1, lat2, lon2)
            if d_c > 1.0:  # law of cosines is unstable near zero
                assert abs(d_h - d_c) / d_c < 1e-3

    def test_symmetry(self):
        a = haversine_km(10.0, 20.0, -30.0, 140.0)
        b = haversine_km(-30.0, 140.0, 10.0, 20.0)
        assert a == pytest.approx(b, abs=1e-12)


AIRPORTS = [
    Airport(code="AAA", latitude=40.0, longitude=-75.0, country="US"),
    Airport(code="BBB", latitude=40.1, longitude=-75.1, country="US"),
    Airport(code="CCC", latitude=51.5, longitude=-0.1, country="GB"),
]


class TestAssignment:
    def test_nearest_within_radius(self):
        doc = Document(id="d", text="x", latitude=40.01, longitude=-75.01)
        assert assign_to_airport(doc, AIRPORTS, DEFAULT_RADIUS_KM) == "AAA"

    def test_outside_radius_is_none(self):
        doc = Document(id="d", text="x", latitude=45.0, longitude=-75.0)
        assert assign_to_airport(doc, AIRPORTS, DEFAULT_RADIUS_KM) is None

    def test_no_coordinates_is_none(self):
        assert assign_to_airport(Document(id="d", text="x"), AIRPORTS, 25.0) is None

    def test_tie_goes_to_earliest_listed(self):
        twins = [
            Airport(code="ZZZ", latitude=10.0, longitude=10.0, country="US"),
            Airport(code="YYY", latitude=10.0, longitude=10.0, country="US"),
        ]
        doc = Document(id="d", text="x", latitude=10.0, longitude=10.0)
        assert assign_to_airport(doc, twins, 25.0) == "ZZZ"

    def test_index_matches_scalar_on_random_points(self):
        rng = np.random.default_rng(9)
        airports = [
            Airport(
                code=f"A{i:03d}",
                latitude=float(rng.uniform(-60, 60)),
                longitude=float(rng.uniform(-170, 170)),
                country="US",
            )
            for i in range(40)
        ]
        index = AirportIndex(airports)
        for _ in range(300):
            lat = float(rng.uniform(-65, 65))
            lon = float(rng.uniform(-175, 175))
            doc = Document(id="d", text="x", latitude=lat, longitude=lon)
            assert index.assign(lat, lon, 25.0) == assign_to_airport(doc, airports, 25.0)

    def test_index_matches_brute_force_nearest(self):
        # brute force over a generous radius so nearly every point matches
        rng = np.random.default_rng(21)
        airports = [
            Airport(
                code=f"A{i:03d}",
                latitude=float(rng.uniform(-60, 60)),
                longitude=float(rng.uniform(-170, 170)),
                country="US",
            )
            for i in range(25)
        ]
        index = AirportIndex(airports)
        for _ in range(300):
            lat = float(rng.uniform(-65, 65))
            lon = float(rng.uniform(-175, 175))
            dists = [haversine_km(lat, lon, a.latitude, a.longitude) for a in airports]
            best = int(np.argmin(dists))
            expect = airports[best].code if dists[best] <= 5000.0 else None
            assert index.assign(lat, lon, 5000.0) == expect


class TestLoadAirports:
    def test_load_and_validate(self, tmp_path):
        p = tmp_path / "airports.csv"
        p.write_text("code,lat,lon,country\nAAA,40.0,-75.0,US\nBBB,41.0,-75.5,US\n")
        airports = load_airports(p)
        assert [a.code for a in airports] == ["AAA", "BBB"]
        assert airports[0].country == "US"

    def test_duplicate_code_fatal(self, tmp_path):
        p = tmp_path / "airports.csv"
        p.write_text("code,lat,lon,country\nAAA,40.0,-75.0,US\nAAA,41.0,-75.5,US\n")
        with pytest.raises(GeoError):
            load_airports(p)

    def test_out_of_range_coordinate_fatal(self, tmp_path):
        p = tmp_path / "airports.csv"
        p.write_text("code,lat,lon,country\nAAA,95.0,-75.0,US\n")
        with pytest.raises(GeoError):
            load_airports(p)


def blob(center_lat, center_lon, n, country, prefix, spread=0.05):
    return [
        Airport(
            code=f"{prefix}{i}",
            latitude=center_lat + spread * i,
            longitude=center_lon + spread * i,
            country=country,
        )
        for i in range(n)
    ]


class TestClustering:
    def test_two_blobs_two_clusters(self):
        airports = blob(40.0, -75.0, 4, "US", "AA") + blob(34.0, -118.0, 4, "US", "BB")
        assignment = cluster_airports(airports, min_cluster_size=3)
        areas = {assignment.airport_to_area[a.code] for a in airports}
        assert areas == {"US-1", "US-2"}
        # blob membership survives clustering
        a_area = assignment.airport_to_area["AA0"]
        assert all(assignment.airport_to_area[f"AA{i}"] == a_area for i in range(4))

    def test_two_blobs_plus_noise(self):
        airports = (
            blob(40.0, -75.0, 4, "US", "AA")
            + blob(34.0, -118.0, 4, "US", "BB")
            + [
                Airport(code="XX0", latitude=0.0, longitude=0.0, country="US"),
                Airport(code="XX1", latitude=-40.0, longitude=100.0, country="US"),
            ]
        )
        assignment = cluster_airports(airports, min_cluster_size=3)
        labels = [assignment.airport_to_area[a.code] for a in airports]
        assert labels.count(NOISE_AREA) == 2
        assert assignment.airport_to_area["XX0"] == NOISE_AREA
        assert assignment.airport_to_area["XX1"] == NOISE_AREA
        assert len(assignment.areas()) == 2

    def test_identical_coordinates_form_one_cluster(self):
        airports = [
            Airport(code=f"S{i}", latitude=10.0, longitude=10.0, country="US")
            for i in range(5)
        ]
        assignment = cluster_airports(airports, min_cluster_size=3)
        labels = {assignment.airport_to_area[a.code] for a in airports}
        assert labels == {"US-1"}

    def test_countries_clustered_independently(self):
        # identical coordinates across countries must never merge
        airports = (
            blob(40.0, -75.0, 4, "US", "AA")
            + blob(34.0, -118.0, 4, "US", "AB")
            + blob(40.0, -75.0, 4, "CA", "BA")
            + blob(34.0, -118.0, 4, "CA", "BB")
        )
        assignment = cluster_airports(airports, min_cluster_size=3)
        assert assignment.airport_to_area["AA0"] == "US-1"
        assert assignment.airport_to_area["AB0"] == "US-2"
        assert assignment.airport_to_area["BA0"] == "CA-1"
        assert assignment.airport_to_area["BB0"] == "CA-2"

    def test_below_min_cluster_size_all_noise(self):
        airports = blob(40.0, -75.0, 2, "US", "AA")
        assignment = cluster_airports(airports, min_cluster_size=3)
        assert all(
            assignment.airport_to_area[a.code] == NOISE_AREA for a in airports
        )

    def test_area_numbering_follows_smallest_member_code(self):
        # the blob containing the lexicographically smallest code gets -1
        airports = blob(40.0, -75.0, 4, "US", "ZZ") + blob(34.0, -118.0, 4, "US", "AA")
        assignment = cluster_airports(airports, min_cluster_size=3)
        assert assignment.airport_to_area["AA0"] == "US-1"
        assert assignment.airport_to_area["ZZ0"] == "US-2"

    def test_input_order_invariance(self):
        airports = blob(40.0, -75.0, 4, "US", "AA") + blob(34.0, -118.0, 4, "US", "BB")
        fwd = cluster_airports(airports, min_cluster_size=3)
        rev = cluster_airports(list(reversed(airports)), min_cluster_size=3)
        assert fwd.airport_to_area == rev.airport_to_area

    def test_min_cluster_size_monotone(self):
        # raising the threshold can only move airports into noise
        rng = np.random.default_rng(5)
        airports = []
        for b in range(3):
            airports += blob(10.0 + 20 * b, 10.0, 3 + b, "US", f"B{b}")
        small = cluster_airports(airports, min_cluster_size=3)
        large = cluster_airports(airports, min_cluster_size=5)
        for a in airports:
            if small.airport_to_area[a.code] == NOISE_AREA:
                assert large.airport_to_area[a.code] == NOISE_AREA

    def test_regions_attach_to_areas(self):
        airports = blob(40.0, -75.0, 4, "US", "AA")
        assignment = cluster_airports(
            airports, min_cluster_size=3, regions={"US": "north-america"}
        )
        assert assignment.area_labels["US-1"] == ("US", "north-america")

    def test_unknown_region_country_fatal(self):
        airports = blob(40.0, -75.0, 4, "US", "AA")
        with pytest.raises(GeoError):
            cluster_airports(airports, min_cluster_size=3, regions={"CA": "x"})


class TestOverrides:
    def _assignment(self):
        airports = blob(40.0, -75.0, 4, "US", "AA") + blob(34.0, -118.0, 4, "US", "BB")
        return cluster_airports(
            airports, min_cluster_size=3, regions={"US": "north-america"}
        )

    def test_move_airport_to_existing_area(self, tmp_path):
        assignment = self._assignment()
        p = tmp_path / "ov.csv"
        p.write_text("code,area_id\nAA0,US-2\n")
        patched = apply_overrides(assignment, load_overrides(p))
        assert patched.airport_to_area["AA0"] == "US-2"
        assert patched.airport_to_area["AA1"] == "US-1"

    def test_new_area_inherits_country_and_region(self, tmp_path):
        assignment = self._assignment()
        p = tmp_path / "ov.csv"
        p.write_text("code,area_id\n# comment line\nAA0,US-9\n")
        patched = apply_overrides(assignment, load_overrides(p))
        assert patched.airport_to_area["AA0"] == "US-9"
        assert patched.area_labels["US-9"] == ("US", "north-america")

    def test_emptied_area_disappears(self, tmp_path):
        assignment = self._assignment()
        p = tmp_path / "ov.csv"
        p.write_text(
            "code,area_id\nBB0,US-1\nBB1,US-1\nBB2,US-1\nBB3,US-1\n"
        )
        patched = apply_overrides(assignment, load_overrides(p))
        assert "US-2" not in patched.areas()

    def test_unknown_airport_code_fatal(self, tmp_path):
        assignment = self._assignment()
        p = tmp_path / "ov.csv"
        p.write_text("code,area_id\nQQQ,US-1\n")
        with pytest.raises(GeoError):
            apply_overrides(assignment, load_overrides(p))


class TestManifest:
    def test_round_trip(self, tmp_path):
        airports = blob(40.0, -75.0, 4, "US", "AA")
        assignment = cluster_airports(
            airports, min_cluster_size=3, regions={"US": "north-america"}
        )
        p = tmp_path / "areas.csv"
        save_area_manifest(assignment, p)
        loaded = load_area_manifest(p)
        assert loaded.airport_to_area == assignment.airport_to_area
        assert loaded.area_labels == assignment.area_labels
        assert {c: (a.latitude, a.longitude) for c, a in loaded.airports.items()} == {
            c: (a.latitude, a.longitude) for c, a in assignment.airports.items()
        }

    def test_missing_manifest_fatal(self, tmp_path):
        with pytest.raises(GeoError):
            load_area_manifest(tmp_path / "nope.csv")
