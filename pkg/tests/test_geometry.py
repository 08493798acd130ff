import json

import numpy as np
import pytest

from antsel.geometry import (
    Box,
    CarrierGrid,
    PlacementError,
    ScenarioGeometry,
    ScenarioParams,
    generate_geometry,
    segments_intersect_box,
)


class TestBox:
    def test_contains_is_closed(self):
        box = Box([0, 0, 0], [1, 2, 3])
        assert box.contains([0.0, 0.0, 0.0])
        assert box.contains([1.0, 2.0, 3.0])
        assert not box.contains([1.0001, 0.5, 0.5])

    def test_batch_contains(self):
        box = Box([0, 0, 0], [1, 1, 1])
        pts = np.array([[0.5, 0.5, 0.5], [2.0, 0.5, 0.5]])
        assert list(box.contains(pts)) == [True, False]

    def test_rejects_inverted_corners(self):
        with pytest.raises(ValueError):
            Box([1, 0, 0], [0, 1, 1])

    def test_dict_round_trip(self):
        box = Box([0.25, 1.5, -3.0], [4.0, 2.5, 0.0])
        clone = Box.from_dict(box.to_dict())
        assert np.array_equal(clone.min_corner, box.min_corner)
        assert np.array_equal(clone.max_corner, box.max_corner)


class TestSegmentBoxIntersection:
    BOX = Box([1, -1, -1], [2, 1, 1])

    def test_straight_through(self):
        assert segments_intersect_box([0, 0, 0], [3, 0, 0], self.BOX)

    def test_misses_to_the_side(self):
        assert not segments_intersect_box([0, 5, 0], [3, 5, 0], self.BOX)

    def test_stops_short(self):
        assert not segments_intersect_box([0, 0, 0], [0.5, 0, 0], self.BOX)

    def test_endpoint_inside(self):
        assert segments_intersect_box([0, 0, 0], [1.5, 0, 0], self.BOX)
        assert segments_intersect_box([1.5, 0, 0], [5, 0, 0], self.BOX)

    def test_touching_face_counts(self):
        assert segments_intersect_box([0, 0, 0], [1.0, 0, 0], self.BOX)

    def test_parallel_inside_slab_but_outside_box(self):
        # Runs parallel to the x slab at y = 3: never enters.
        assert not segments_intersect_box([0, 3, 0], [3, 3, 0], self.BOX)

    def test_degenerate_segment(self):
        assert segments_intersect_box([1.5, 0, 0], [1.5, 0, 0], self.BOX)
        assert not segments_intersect_box([0, 0, 0], [0, 0, 0], self.BOX)

    def test_batched_shapes(self):
        starts = np.zeros((4, 1, 3))
        ends = np.array([[3, 0, 0], [0, 5, 0]], dtype=float)[None].repeat(4, axis=0)
        hit = segments_intersect_box(starts, ends, self.BOX)
        assert hit.shape == (4, 2)
        assert np.array_equal(hit[:, 0], np.ones(4, bool))
        assert np.array_equal(hit[:, 1], np.zeros(4, bool))


class TestCarrierGrid:
    def test_span_equals_bandwidth(self):
        grid = CarrierGrid(2.6e9, 20e6, 300)
        freqs = grid.subcarrier_frequencies
        assert len(freqs) == 300
        assert freqs[-1] - freqs[0] == pytest.approx(20e6, abs=1e-3)
        assert np.all(np.diff(freqs) > 0)

    def test_centred_on_carrier(self):
        freqs = CarrierGrid(2.6e9, 20e6, 5).subcarrier_frequencies
        assert freqs[2] == pytest.approx(2.6e9)

    def test_single_subcarrier(self):
        freqs = CarrierGrid(2.6e9, 0.0, 1).subcarrier_frequencies
        assert np.array_equal(freqs, [2.6e9])

    @pytest.mark.parametrize("kwargs", [
        dict(carrier_frequency=-1.0, bandwidth=1.0, n_subcarriers=4),
        dict(carrier_frequency=1e9, bandwidth=-1.0, n_subcarriers=4),
        dict(carrier_frequency=1e9, bandwidth=0.0, n_subcarriers=4),
        dict(carrier_frequency=1e9, bandwidth=1.0, n_subcarriers=0),
        dict(carrier_frequency=1e6, bandwidth=3e6, n_subcarriers=4),
    ])
    def test_rejects_bad_grids(self, kwargs):
        with pytest.raises(ValueError):
            CarrierGrid(**kwargs)


class TestGenerateGeometry:
    def test_paper_scale_counts(self):
        geo = generate_geometry(ScenarioParams(n_tx=64, n_users=8, n_scatterers=75), seed=1)
        assert geo.n_tx == 64
        assert geo.n_users == 8
        assert geo.n_scatterers == 75
        for arr in (geo.tx_positions, geo.user_positions, geo.scatterer_positions):
            assert geo.area_bounds.contains(arr).all()

    def test_minimal_counts(self):
        geo = generate_geometry(ScenarioParams(n_tx=1, n_users=1, n_scatterers=0), seed=7)
        assert geo.n_tx == 1
        assert geo.n_users == 1
        assert geo.n_scatterers == 0

    def test_determinism(self, small_params):
        a = generate_geometry(small_params, seed=3)
        b = generate_geometry(small_params, seed=3)
        assert np.array_equal(a.tx_positions, b.tx_positions)
        assert np.array_equal(a.user_positions, b.user_positions)
        assert np.array_equal(a.scatterer_positions, b.scatterer_positions)

    def test_seed_changes_layout(self, small_params):
        a = generate_geometry(small_params, seed=3)
        b = generate_geometry(small_params, seed=4)
        assert not np.array_equal(a.tx_positions, b.tx_positions)

    def test_common_tx_height(self, small_params):
        geo = generate_geometry(small_params, seed=5)
        assert np.all(geo.tx_positions[:, 2] == small_params.tx_height)
        assert np.all(geo.user_positions[:, 2] == small_params.user_height)

    def test_entities_avoid_obstacle(self):
        params = ScenarioParams(
            n_tx=30,
            n_users=20,
            n_scatterers=40,
            area=Box([0, 0, 0], [50, 50, 20]),
            obstacle=Box([10, 10, 0], [40, 40, 20]),
            tx_height=5.0,
            user_height=1.5,
        )
        geo = generate_geometry(params, seed=2)
        for arr in (geo.tx_positions, geo.user_positions, geo.scatterer_positions):
            assert not params.obstacle.contains(arr).any()

    def test_distinct_antennas(self, small_params):
        geo = generate_geometry(small_params, seed=9)
        assert np.unique(geo.tx_positions, axis=0).shape[0] == geo.n_tx

    def test_placement_failure_when_obstacle_fills_area(self):
        params = ScenarioParams(
            n_tx=4,
            n_users=1,
            n_scatterers=0,
            area=Box([0, 0, 0], [10, 10, 10]),
            obstacle=Box([0, 0, 0], [10, 10, 10]),
            tx_height=5.0,
            user_height=1.0,
            max_placement_tries=50,
        )
        with pytest.raises(PlacementError):
            generate_geometry(params, seed=1)

    def test_invalid_heights(self):
        with pytest.raises(ValueError):
            ScenarioParams(tx_height=1e6)

    def test_bad_seed(self, small_params):
        with pytest.raises(ValueError):
            generate_geometry(small_params, seed=-1)


class TestGeometrySerialization:
    def test_json_round_trip_exact(self, small_geometry):
        text = small_geometry.to_json()
        clone = ScenarioGeometry.from_json(text)
        assert np.array_equal(clone.tx_positions, small_geometry.tx_positions)
        assert np.array_equal(clone.user_positions, small_geometry.user_positions)
        assert np.array_equal(clone.scatterer_positions, small_geometry.scatterer_positions)
        assert np.array_equal(clone.obstacle.min_corner, small_geometry.obstacle.min_corner)
        assert np.array_equal(clone.area_bounds.max_corner, small_geometry.area_bounds.max_corner)
        # Round-tripping again yields the identical document.
        assert clone.to_json() == text

    def test_json_has_triples_per_entity_class(self, small_geometry):
        doc = json.loads(small_geometry.to_json())
        assert set(doc) == {
            "tx_positions", "user_positions", "scatterer_positions", "obstacle", "area_bounds",
        }
        assert all(len(p) == 3 for p in doc["tx_positions"])

    def test_rejects_unknown_keys(self, small_geometry):
        doc = json.loads(small_geometry.to_json())
        doc["surprise"] = 1
        with pytest.raises(ValueError):
            ScenarioGeometry.from_json(json.dumps(doc))

    def test_file_round_trip(self, small_geometry, tmp_path):
        path = tmp_path / "geometry.json"
        small_geometry.save(path)
        clone = ScenarioGeometry.load(path)
        assert np.array_equal(clone.tx_positions, small_geometry.tx_positions)


class TestScenarioGeometryInvariants:
    def test_positions_must_be_inside_bounds(self):
        with pytest.raises(ValueError):
            ScenarioGeometry(
                tx_positions=np.array([[500.0, 0.0, 0.0]]),
                user_positions=np.array([[1.0, 1.0, 0.0]]),
                scatterer_positions=np.empty((0, 3)),
                obstacle=Box([2, 2, 0], [3, 3, 1]),
                area_bounds=Box([0, 0, 0], [10, 10, 10]),
            )

    def test_duplicate_antennas_rejected(self):
        with pytest.raises(ValueError):
            ScenarioGeometry(
                tx_positions=np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]]),
                user_positions=np.array([[2.0, 2.0, 0.0]]),
                scatterer_positions=np.empty((0, 3)),
                obstacle=Box([5, 5, 0], [6, 6, 1]),
                area_bounds=Box([0, 0, 0], [10, 10, 10]),
            )

    def test_immutable_arrays(self, small_geometry):
        with pytest.raises(ValueError):
            small_geometry.tx_positions[0, 0] = 99.0
