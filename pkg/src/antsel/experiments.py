"""Seeded experiment harness.

Four studies over one synthetic scenario family:

* ``sweep_selected_count``: rate versus selected-antenna count for greedy
  forward/backward, averaged random selection, and the local algorithm
  (whose count is emergent per neighbourhood size).
* ``sweep_neighborhood``: committed selection size versus neighbourhood
  size, with per-iteration size traces.
* ``compare_subcarrier_policies``: the local algorithm under full, random
  subset and strongest subset subcarrier scoring, against greedy forward and
  matched random baselines.
* ``csi_robustness``: selections made on a perturbed tensor, rescored on the
  true one.

Every run's seed derives from the master seed through a documented integer
mix, so tables are bit-reproducible and insensitive to execution order.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._validation import check_count, check_seed
from .capacity import DEFAULT_RHO, PowerControl, evaluate_selection
from .channel import (
    ChannelTensor,
    PerturbationSpec,
    SubcarrierPolicy,
    normalize_csi,
    perturb_csi,
    synthesize_channel,
)
from .geometry import CarrierGrid, ScenarioGeometry, ScenarioParams, generate_geometry
from .selection import (
    LocalParams,
    build_neighborhoods,
    greedy_backward_path,
    greedy_forward_path,
    local_select,
    random_select,
)

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    """One round of the SplitMix64 finaliser (public-domain constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def split_seed(master_seed: int, kind: str, index: int) -> int:
    """Derive an independent 64-bit child seed for one run.

    The child is a SplitMix64 mix of the master seed, the UTF-8 bytes of the
    run-kind tag, and the run index. Runs are therefore reproducible and
    order-insensitive: any (kind, index) pair can be recomputed in isolation.
    """
    h = _splitmix64(check_seed(master_seed))
    for byte in kind.encode("utf-8"):
        h = _splitmix64(h ^ byte)
    return _splitmix64(h ^ (int(index) & _MASK64))


DEFAULT_K_GRID = (4, 8, 16, 32, 48, 63)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one experiment needs: scenario family, grid, and run knobs."""

    scenario: ScenarioParams = ScenarioParams()
    grid: CarrierGrid = CarrierGrid(2.6e9, 20e6, 300)
    rho: float = DEFAULT_RHO
    power_control: PowerControl = PowerControl.SNR_GAIN
    user_counts: tuple[int, ...] = (8,)
    master_seed: int = 1
    replication: int = 20
    local: LocalParams = LocalParams(n_neighbors=16)
    k_grid: tuple[int, ...] = DEFAULT_K_GRID
    csi_perturbation: float = 0.3

    def __post_init__(self):
        check_seed(self.master_seed)
        check_count(self.replication, name="replication", minimum=1)
        if len(self.user_counts) == 0:
            raise ValueError("user_counts must not be empty")
        for u in self.user_counts:
            check_count(u, name="user count", minimum=1)
        for k in self.k_grid:
            check_count(k, name="neighbourhood size", minimum=1, maximum=self.scenario.n_tx - 1)
        if not 0.0 <= float(self.csi_perturbation) < 1.0:
            raise ValueError("csi_perturbation must lie in [0, 1)")


def config_to_dict(config: ScenarioConfig) -> dict:
    return {
        "scenario": config.scenario.to_dict(),
        "grid": {
            "carrier_frequency": config.grid.carrier_frequency,
            "bandwidth": config.grid.bandwidth,
            "n_subcarriers": config.grid.n_subcarriers,
        },
        "rho": config.rho,
        "power_control": config.power_control.value,
        "user_counts": list(config.user_counts),
        "master_seed": config.master_seed,
        "replication": config.replication,
        "local": config.local.to_dict(),
        "k_grid": list(config.k_grid),
        "csi_perturbation": config.csi_perturbation,
    }


def config_from_dict(data: dict) -> ScenarioConfig:
    """Strict inverse of config_to_dict; unknown keys are rejected."""
    known = {
        "scenario", "grid", "rho", "power_control", "user_counts",
        "master_seed", "replication", "local", "k_grid", "csi_perturbation",
    }
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict = {}
    if "scenario" in data:
        kwargs["scenario"] = ScenarioParams.from_dict(data["scenario"])
    if "grid" in data:
        grid = dict(data["grid"])
        grid_unknown = set(grid) - {"carrier_frequency", "bandwidth", "n_subcarriers"}
        if grid_unknown:
            raise ValueError(f"unknown grid keys: {sorted(grid_unknown)}")
        kwargs["grid"] = CarrierGrid(**grid)
    if "rho" in data:
        kwargs["rho"] = float(data["rho"])
    if "power_control" in data:
        kwargs["power_control"] = PowerControl(data["power_control"])
    if "user_counts" in data:
        kwargs["user_counts"] = tuple(int(u) for u in data["user_counts"])
    if "master_seed" in data:
        kwargs["master_seed"] = int(data["master_seed"])
    if "replication" in data:
        kwargs["replication"] = int(data["replication"])
    if "local" in data:
        kwargs["local"] = LocalParams.from_dict(data["local"])
    if "k_grid" in data:
        kwargs["k_grid"] = tuple(int(k) for k in data["k_grid"])
    if "csi_perturbation" in data:
        kwargs["csi_perturbation"] = float(data["csi_perturbation"])
    return ScenarioConfig(**kwargs)


CSV_COLUMNS = (
    "algorithm", "power_control", "n_users", "k", "policy",
    "n_selected", "capacity_eq", "zf_rate", "seed", "wall_time_ms",
)


@dataclass(frozen=True)
class RunResult:
    """One scored selection; maps 1:1 onto a CSV row."""

    algorithm: str
    power_control: str
    n_users: int
    k: int | None
    policy: str
    n_selected: int
    capacity_eq: float
    zf_rate: float
    seed: int
    wall_time_ms: float | None

    def __post_init__(self):
        for name in ("capacity_eq", "zf_rate"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if self.wall_time_ms is not None and not (
            np.isfinite(self.wall_time_ms) and self.wall_time_ms >= 0.0
        ):
            raise ValueError("wall_time_ms must be finite and >= 0 when present")
        if self.n_selected < 0:
            raise ValueError("n_selected must be >= 0")

    def as_row(self) -> list[str]:
        def fmt(value):
            if value is None:
                return ""
            if isinstance(value, float):
                return repr(value)
            return str(value)

        return [fmt(getattr(self, col)) for col in CSV_COLUMNS]


def write_csv(results, path) -> None:
    """Write results as UTF-8 CSV with the mandatory header row.

    Floats are rendered with repr (full round-trip precision, '.' decimal
    separator); absent optional fields become empty cells.
    """
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for result in results:
            writer.writerow(result.as_row())


def write_json(results, path, config: ScenarioConfig, extras: dict | None = None) -> None:
    """JSON mirror of a result table with the full config embedded."""
    doc = {
        "version": 1,
        "config": config_to_dict(config),
        "results": [dict(zip(CSV_COLUMNS, (getattr(r, c) for c in CSV_COLUMNS))) for r in results],
    }
    if extras:
        doc["extras"] = extras
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2), encoding="utf-8")


def build_channel(config: ScenarioConfig, n_users: int) -> tuple[ScenarioGeometry, ChannelTensor]:
    """Scenario drop and normalised tensor for one user count."""
    seed = split_seed(config.master_seed, "scenario", n_users)
    params = replace(config.scenario, n_users=n_users)
    geometry = generate_geometry(params, seed)
    return geometry, normalize_csi(synthesize_channel(geometry, config.grid))


def _mask_from_indices(indices: np.ndarray, n_tx: int) -> np.ndarray:
    mask = np.zeros(n_tx, dtype=bool)
    mask[indices] = True
    return mask


def _local_row(config, tensor, table, params, *, n_users, algorithm="local"):
    start = time.perf_counter()
    trace = local_select(tensor, table, params, config.rho, config.power_control)
    elapsed_ms = (time.perf_counter() - start) * 1e3
    report = evaluate_selection(tensor, trace.committed_mask, config.power_control, config.rho)
    return RunResult(
        algorithm=algorithm,
        power_control=config.power_control.value,
        n_users=n_users,
        k=params.n_neighbors,
        policy=params.subcarriers.label,
        n_selected=report.n_selected,
        capacity_eq=report.equal_power_capacity,
        zf_rate=report.zf_waterfilling_rate,
        seed=params.seed,
        wall_time_ms=elapsed_ms,
    ), trace


def _random_mean_row(config, tensor, n_selected, *, n_users, kind_tag) -> RunResult:
    """Mean rates over ``config.replication`` uniform selections of one size."""
    n_tx = tensor.n_tx
    caps, rates = [], []
    for rep in range(config.replication):
        seed = split_seed(config.master_seed, kind_tag, n_selected * 100_003 + rep)
        mask = random_select(n_selected, n_tx, seed)
        report = evaluate_selection(tensor, mask, config.power_control, config.rho)
        caps.append(report.equal_power_capacity)
        rates.append(report.zf_waterfilling_rate)
    return RunResult(
        algorithm="random",
        power_control=config.power_control.value,
        n_users=n_users,
        k=None,
        policy="full",
        n_selected=n_selected,
        capacity_eq=float(np.mean(caps)),
        zf_rate=float(np.mean(rates)),
        seed=config.master_seed,
        wall_time_ms=None,
    )


def _greedy_rows(config, tensor, *, n_users, forward: bool, sizes=None) -> list[RunResult]:
    """Rate at every prefix of one greedy trajectory.

    Greedy selections nest, so a single trajectory prices every target size.
    """
    n_tx = tensor.n_tx
    start = time.perf_counter()
    if forward:
        order = greedy_forward_path(tensor, config.rho, config.power_control)
    else:
        removals = greedy_backward_path(tensor, config.rho, config.power_control)
    elapsed_ms = (time.perf_counter() - start) * 1e3
    rows = []
    size_list = range(1, n_tx + 1) if sizes is None else sorted(set(int(s) for s in sizes))
    for m in size_list:
        if forward:
            mask = _mask_from_indices(order[:m], n_tx)
        else:
            mask = np.ones(n_tx, dtype=bool)
            mask[removals[: n_tx - m]] = False
        report = evaluate_selection(tensor, mask, config.power_control, config.rho)
        rows.append(
            RunResult(
                algorithm="greedy_forward" if forward else "greedy_backward",
                power_control=config.power_control.value,
                n_users=n_users,
                k=None,
                policy="full",
                n_selected=m,
                capacity_eq=report.equal_power_capacity,
                zf_rate=report.zf_waterfilling_rate,
                seed=config.master_seed,
                wall_time_ms=elapsed_ms,
            )
        )
    return rows


ALL_ALGORITHMS = ("greedy_forward", "greedy_backward", "random", "local")


def sweep_selected_count(config: ScenarioConfig, algorithms=ALL_ALGORITHMS) -> list[RunResult]:
    """Rate-versus-selected-count study under the configured power control.

    Greedy and random rows cover every count from 1 to n_tx (random rows are
    replication means); local rows record the emergent count of one run per
    neighbourhood size in ``config.k_grid``.
    """
    unknown = set(algorithms) - set(ALL_ALGORITHMS)
    if unknown:
        raise ValueError(f"unknown algorithms: {sorted(unknown)}")
    rows: list[RunResult] = []
    for n_users in config.user_counts:
        geometry, tensor = build_channel(config, n_users)
        if "greedy_forward" in algorithms:
            rows.extend(_greedy_rows(config, tensor, n_users=n_users, forward=True))
        if "greedy_backward" in algorithms:
            rows.extend(_greedy_rows(config, tensor, n_users=n_users, forward=False))
        if "random" in algorithms:
            for m in range(1, tensor.n_tx + 1):
                rows.append(
                    _random_mean_row(config, tensor, m, n_users=n_users, kind_tag=f"sweep-random-{n_users}")
                )
        if "local" in algorithms:
            for k in config.k_grid:
                table = build_neighborhoods(geometry.tx_positions, k)
                params = replace(
                    config.local,
                    n_neighbors=k,
                    seed=split_seed(config.master_seed, f"sweep-local-{n_users}", k),
                )
                row, _ = _local_row(config, tensor, table, params, n_users=n_users)
                rows.append(row)
    return rows


def sweep_neighborhood(config: ScenarioConfig, k_grid=None, n_seeds: int = 5):
    """Committed-size study over neighbourhood sizes.

    Returns (rows, traces); ``traces`` maps a run label to the per-iteration
    selected-antenna counts, which expose the oscillation between the two
    preferred sizes in large neighbourhoods.
    """
    k_grid = tuple(config.k_grid if k_grid is None else k_grid)
    check_count(n_seeds, name="n_seeds", minimum=1)
    rows: list[RunResult] = []
    traces: dict[str, list[int]] = {}
    for n_users in config.user_counts:
        geometry, tensor = build_channel(config, n_users)
        for k in k_grid:
            table = build_neighborhoods(geometry.tx_positions, k)
            for rep in range(n_seeds):
                params = replace(
                    config.local,
                    n_neighbors=k,
                    seed=split_seed(config.master_seed, f"neigh-{n_users}-{k}", rep),
                )
                row, trace = _local_row(config, tensor, table, params, n_users=n_users)
                rows.append(row)
                traces[f"users{n_users}_k{k}_rep{rep}"] = [int(s) for s in trace.sizes]
    return rows, traces


def _policy_grid(n_subcarriers: int) -> tuple[SubcarrierPolicy, ...]:
    # 5% random subset; on grids too small for 5% to round to one subcarrier,
    # fall back to a single-subcarrier fraction.
    fraction = 0.05
    if int(round(fraction * n_subcarriers)) < 1:
        fraction = 1.0 / n_subcarriers
    return (
        SubcarrierPolicy.full(),
        SubcarrierPolicy.random_fraction(fraction),
        SubcarrierPolicy.strongest(min(60, n_subcarriers)),
    )


def compare_subcarrier_policies(config: ScenarioConfig, n_seeds: int = 5) -> list[RunResult]:
    """Local algorithm under each subcarrier policy, plus matched baselines.

    For every policy run the table also carries a greedy-forward row and a
    replication-mean random row at the same emergent selected count, so rate
    deltas over random selection can be read off directly.
    """
    check_count(n_seeds, name="n_seeds", minimum=1)
    n_users = config.user_counts[0]
    geometry, tensor = build_channel(config, n_users)
    rows: list[RunResult] = []
    matched_sizes: set[int] = set()
    for policy in _policy_grid(config.grid.n_subcarriers):
        for rep in range(n_seeds):
            params = replace(
                config.local,
                subcarriers=policy,
                seed=split_seed(config.master_seed, f"policy-{policy.label}", rep),
            )
            table = build_neighborhoods(geometry.tx_positions, params.n_neighbors)
            row, _ = _local_row(config, tensor, table, params, n_users=n_users)
            rows.append(row)
            matched_sizes.add(row.n_selected)
    rows.extend(
        _greedy_rows(config, tensor, n_users=n_users, forward=True, sizes=matched_sizes)
    )
    for m in sorted(matched_sizes):
        rows.append(_random_mean_row(config, tensor, m, n_users=n_users, kind_tag="policy-random"))
    return rows


def rate_delta_over_random(rows) -> dict[tuple[str, str, int], float]:
    """ZF-rate delta of each non-random row over the random mean of equal size.

    Keyed by (algorithm, policy, n_selected); rows without a matching random
    baseline are skipped.
    """
    random_rates = {
        row.n_selected: row.zf_rate for row in rows if row.algorithm == "random"
    }
    deltas = {}
    for row in rows:
        if row.algorithm == "random" or row.n_selected not in random_rates:
            continue
        deltas[(row.algorithm, row.policy, row.n_selected)] = (
            row.zf_rate - random_rates[row.n_selected]
        )
    return deltas


def csi_robustness(config: ScenarioConfig, perturbation: PerturbationSpec | float | None = None,
                   n_seeds: int = 10) -> list[RunResult]:
    """Selection on perturbed knowledge, scored on the true channel.

    Per seed the table gets two rows: the clean run ('local') and the run
    whose selection was made on the perturbed tensor but rescored on the true
    one ('local_perturbed_csi'). The perturbation argument may be a
    PerturbationSpec (its seed is re-derived per repetition), a bare
    magnitude, or None for the configured default.
    """
    check_count(n_seeds, name="n_seeds", minimum=1)
    if perturbation is None:
        magnitude = config.csi_perturbation
    elif isinstance(perturbation, PerturbationSpec):
        magnitude = perturbation.relative_magnitude
    else:
        magnitude = float(perturbation)
    n_users = config.user_counts[0]
    geometry, tensor = build_channel(config, n_users)
    table = build_neighborhoods(geometry.tx_positions, config.local.n_neighbors)
    rows: list[RunResult] = []
    for rep in range(n_seeds):
        params = replace(
            config.local, seed=split_seed(config.master_seed, "csi-selection", rep)
        )
        clean_row, _ = _local_row(config, tensor, table, params, n_users=n_users)
        rows.append(clean_row)

        spec = PerturbationSpec(
            magnitude, seed=split_seed(config.master_seed, "csi-perturb", rep)
        )
        perturbed = perturb_csi(tensor, spec)
        start = time.perf_counter()
        trace = local_select(perturbed, table, params, config.rho, config.power_control)
        elapsed_ms = (time.perf_counter() - start) * 1e3
        report = evaluate_selection(
            tensor, trace.committed_mask, config.power_control, config.rho
        )
        rows.append(
            RunResult(
                algorithm="local_perturbed_csi",
                power_control=config.power_control.value,
                n_users=n_users,
                k=params.n_neighbors,
                policy=params.subcarriers.label,
                n_selected=report.n_selected,
                capacity_eq=report.equal_power_capacity,
                zf_rate=report.zf_waterfilling_rate,
                seed=params.seed,
                wall_time_ms=elapsed_ms,
            )
        )
    return rows
