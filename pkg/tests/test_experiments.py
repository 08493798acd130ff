import csv
import json

import numpy as np
import pytest

from antsel.capacity import PowerControl
from antsel.channel import PerturbationSpec
from antsel.experiments import (
    CSV_COLUMNS,
    RunResult,
    ScenarioConfig,
    build_channel,
    compare_subcarrier_policies,
    config_from_dict,
    config_to_dict,
    csi_robustness,
    rate_delta_over_random,
    split_seed,
    sweep_neighborhood,
    sweep_selected_count,
    write_csv,
    write_json,
)
from antsel.geometry import Box, CarrierGrid, ScenarioParams
from antsel.selection import LocalParams


def strip_timings(rows):
    from dataclasses import replace

    return [replace(r, wall_time_ms=None) for r in rows]


@pytest.fixture(scope="module")
def small_config():
    return ScenarioConfig(
        scenario=ScenarioParams(
            n_tx=10,
            n_users=2,
            n_scatterers=8,
            area=Box([0, 0, 0], [120, 120, 30]),
            obstacle=Box([50, 50, 0], [70, 70, 18]),
            tx_height=25.0,
            user_height=1.5,
        ),
        grid=CarrierGrid(2.6e9, 20e6, 12),
        user_counts=(2,),
        master_seed=5,
        replication=4,
        local=LocalParams(n_neighbors=4, n_iterations=8),
        k_grid=(3, 6),
    )


@pytest.fixture(scope="module")
def sweep_rows(small_config):
    return sweep_selected_count(small_config)


@pytest.fixture(scope="module")
def policy_rows(small_config):
    return compare_subcarrier_policies(small_config, n_seeds=2)


class TestSplitSeed:
    def test_deterministic(self):
        assert split_seed(1, "scenario", 8) == split_seed(1, "scenario", 8)

    def test_distinct_across_kind_and_index(self):
        seeds = {
            split_seed(1, kind, idx)
            for kind in ("scenario", "local", "random")
            for idx in range(50)
        }
        assert len(seeds) == 150

    def test_master_seed_matters(self):
        assert split_seed(1, "scenario", 0) != split_seed(2, "scenario", 0)

    def test_range(self):
        for idx in range(100):
            assert 0 <= split_seed(3, "x", idx) < 2**64


class TestBuildChannel:
    def test_normalized_output(self, small_config):
        geometry, tensor = build_channel(small_config, 2)
        assert tensor.normalized
        assert tensor.n_users == 2
        assert tensor.n_tx == 10

    def test_deterministic(self, small_config):
        _, a = build_channel(small_config, 2)
        _, b = build_channel(small_config, 2)
        assert np.array_equal(a.entries, b.entries)

    def test_user_count_changes_scenario(self, small_config):
        geo2, _ = build_channel(small_config, 2)
        geo3, _ = build_channel(small_config, 3)
        assert geo3.n_users == 3
        assert not np.array_equal(geo2.tx_positions, geo3.tx_positions)


class TestSweepSelectedCount:
    def test_row_population(self, sweep_rows, small_config):
        rows = sweep_rows
        n_tx = small_config.scenario.n_tx
        by_algo = {}
        for row in rows:
            by_algo.setdefault(row.algorithm, []).append(row)
        assert len(by_algo["greedy_forward"]) == n_tx
        assert len(by_algo["greedy_backward"]) == n_tx
        assert len(by_algo["random"]) == n_tx
        assert len(by_algo["local"]) == len(small_config.k_grid)
        for row in by_algo["local"]:
            assert row.k in small_config.k_grid
            assert 0 <= row.n_selected <= n_tx

    def test_full_selection_coincides_across_algorithms(self, sweep_rows, small_config):
        rows = sweep_rows
        n_tx = small_config.scenario.n_tx
        full = [r for r in rows if r.n_selected == n_tx and r.algorithm != "local"]
        assert len(full) == 3
        rates = {round(r.zf_rate, 12) for r in full}
        assert len(rates) == 1

    def test_zf_positive_implies_feasible_size(self, sweep_rows):
        for row in sweep_rows:
            if row.zf_rate > 0.0:
                assert row.n_selected >= row.n_users

    def test_greedy_forward_monotone_under_snr_gain(self, sweep_rows):
        fwd = sorted(
            (r for r in sweep_rows if r.algorithm == "greedy_forward"), key=lambda r: r.n_selected
        )
        caps = [r.capacity_eq for r in fwd]
        assert all(b >= a - 1e-12 for a, b in zip(caps, caps[1:]))

    def test_deterministic_modulo_timing(self, sweep_rows, small_config):
        again = sweep_selected_count(small_config)
        assert strip_timings(again) == strip_timings(sweep_rows)

    def test_algorithm_subset(self, small_config):
        rows = sweep_selected_count(small_config, algorithms=("random",))
        assert {r.algorithm for r in rows} == {"random"}

    def test_unknown_algorithm_rejected(self, small_config):
        with pytest.raises(ValueError):
            sweep_selected_count(small_config, algorithms=("simulated_annealing",))


class TestSweepNeighborhood:
    def test_rows_and_traces(self, small_config):
        rows, traces = sweep_neighborhood(small_config, n_seeds=2)
        assert len(rows) == len(small_config.k_grid) * 2
        assert len(traces) == len(rows)
        for key, sizes in traces.items():
            assert len(sizes) == small_config.local.n_iterations
        for row in rows:
            assert row.algorithm == "local"

    def test_single_k_grid(self, small_config):
        rows, _ = sweep_neighborhood(small_config, k_grid=(4,), n_seeds=1)
        assert len(rows) == 1
        assert rows[0].k == 4

    def test_spearman_negative_on_produced_table(self):
        # Larger neighbourhoods must select fewer antennas on average.
        from scipy.stats import spearmanr

        config = ScenarioConfig(
            scenario=ScenarioParams(
                n_tx=16,
                n_users=2,
                n_scatterers=10,
                area=Box([0, 0, 0], [150, 150, 30]),
                obstacle=Box([60, 60, 0], [90, 90, 18]),
                tx_height=25.0,
                user_height=1.5,
            ),
            grid=CarrierGrid(2.6e9, 20e6, 12),
            user_counts=(2,),
            master_seed=2,
            replication=3,
            local=LocalParams(n_neighbors=4, n_iterations=12),
            k_grid=(2, 5, 9, 15),
        )
        rows, _ = sweep_neighborhood(config, n_seeds=3)
        ks = sorted({row.k for row in rows})
        means = [np.mean([r.n_selected for r in rows if r.k == k]) for k in ks]
        corr = spearmanr(ks, means).statistic
        assert corr < 0


class TestCompareSubcarrierPolicies:
    def test_policies_present(self, policy_rows, small_config):
        policies = {r.policy for r in policy_rows if r.algorithm == "local"}
        n_sub = small_config.grid.n_subcarriers
        assert policies == {"full", "random_0.05", f"strongest_{min(60, n_sub)}"}

    def test_matched_baselines_present(self, policy_rows):
        local_sizes = {r.n_selected for r in policy_rows if r.algorithm == "local"}
        greedy_sizes = {r.n_selected for r in policy_rows if r.algorithm == "greedy_forward"}
        random_sizes = {r.n_selected for r in policy_rows if r.algorithm == "random"}
        assert local_sizes <= greedy_sizes
        assert local_sizes <= random_sizes

    def test_local_rows_carry_timings(self, policy_rows):
        for row in policy_rows:
            if row.algorithm == "local":
                assert row.wall_time_ms is not None and row.wall_time_ms > 0

    def test_rate_deltas_computable(self, policy_rows):
        deltas = rate_delta_over_random(policy_rows)
        local_keys = [key for key in deltas if key[0] == "local"]
        assert local_keys

    def test_deterministic_modulo_timing(self, small_config, policy_rows):
        again = compare_subcarrier_policies(small_config, n_seeds=2)
        assert strip_timings(again) == strip_timings(policy_rows)


class TestCsiRobustness:
    def test_zero_perturbation_identical_scores(self, small_config):
        rows = csi_robustness(small_config, 0.0, n_seeds=2)
        clean = [r for r in rows if r.algorithm == "local"]
        perturbed = [r for r in rows if r.algorithm == "local_perturbed_csi"]
        assert len(clean) == len(perturbed) == 2
        for c, p in zip(clean, perturbed):
            assert c.zf_rate == p.zf_rate
            assert c.n_selected == p.n_selected

    def test_smoke_with_default_magnitude(self, small_config):
        rows = csi_robustness(small_config, n_seeds=3)
        assert len(rows) == 6
        assert all(np.isfinite(r.zf_rate) for r in rows)

    def test_accepts_spec_object(self, small_config):
        rows = csi_robustness(small_config, PerturbationSpec(0.3, seed=0), n_seeds=1)
        assert len(rows) == 2


class TestRunResultAndWriters:
    def make_row(self, **kwargs):
        defaults = dict(
            algorithm="local",
            power_control="snr_gain",
            n_users=8,
            k=16,
            policy="full",
            n_selected=30,
            capacity_eq=12.5,
            zf_rate=27.25,
            seed=42,
            wall_time_ms=100.0,
        )
        defaults.update(kwargs)
        return RunResult(**defaults)

    def test_rejects_negative_rate(self):
        with pytest.raises(ValueError):
            self.make_row(zf_rate=-0.1)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            self.make_row(capacity_eq=float("nan"))

    def test_csv_header_and_values(self, tmp_path):
        path = tmp_path / "results.csv"
        write_csv([self.make_row(), self.make_row(k=None, wall_time_ms=None)], path)
        with open(path, encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            first = next(reader)
            second = next(reader)
        assert tuple(header) == CSV_COLUMNS
        assert first[0] == "local"
        assert float(first[6]) == 12.5
        assert "." in first[7] and "," not in first[7]
        assert second[3] == ""  # absent k
        assert second[9] == ""  # absent timing

    def test_json_mirror_embeds_config(self, small_config, tmp_path):
        path = tmp_path / "results.json"
        write_json([self.make_row()], path, small_config, extras={"note": "x"})
        doc = json.loads(path.read_text())
        assert doc["version"] == 1
        assert doc["config"]["master_seed"] == small_config.master_seed
        assert doc["extras"] == {"note": "x"}
        assert doc["results"][0]["zf_rate"] == 27.25


class TestConfigSerialization:
    def test_round_trip(self, small_config):
        doc = config_to_dict(small_config)
        clone = config_from_dict(doc)
        assert clone == small_config

    def test_unknown_keys_rejected(self, small_config):
        doc = config_to_dict(small_config)
        doc["extra"] = 1
        with pytest.raises(ValueError):
            config_from_dict(doc)

    def test_nested_unknown_keys_rejected(self, small_config):
        doc = config_to_dict(small_config)
        doc["scenario"]["surprise"] = 1
        with pytest.raises(ValueError):
            config_from_dict(doc)

    def test_partial_document_uses_defaults(self):
        config = config_from_dict({"master_seed": 9})
        assert config.master_seed == 9
        assert config.scenario.n_tx == 64
        assert config.power_control is PowerControl.SNR_GAIN

    def test_k_grid_validated_against_scenario(self):
        with pytest.raises(ValueError):
            ScenarioConfig(k_grid=(64,))
