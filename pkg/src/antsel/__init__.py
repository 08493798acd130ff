"""Antenna-subset selection for distributed massive MIMO.

A geometric multipath channel simulator, equal-power and zero-forcing
water-filling rate metrics, a self-organising neighbourhood-local selection
algorithm with greedy and random baselines (exposed as scikit-learn style
estimators), and a reproducible experiment harness with a CLI.
"""

from .capacity import (
    DEFAULT_RHO,
    CapacityReport,
    PowerControl,
    evaluate_selection,
    power_factor,
    score_selection,
    sum_capacity_equal_power,
    waterfill,
    zf_waterfilling_rate,
)
from .channel import (
    ChannelTensor,
    DegenerateGeometryError,
    NormalizationError,
    PerturbationSpec,
    SubcarrierPolicy,
    load_channel_tensor,
    normalize_csi,
    perturb_csi,
    save_channel_tensor,
    select_subcarriers_random,
    select_subcarriers_strongest,
    synthesize_channel,
)
from .experiments import (
    RunResult,
    ScenarioConfig,
    build_channel,
    compare_subcarrier_policies,
    csi_robustness,
    rate_delta_over_random,
    split_seed,
    sweep_neighborhood,
    sweep_selected_count,
    write_csv,
    write_json,
)
from .geometry import (
    SPEED_OF_LIGHT,
    Box,
    CarrierGrid,
    PlacementError,
    ScenarioGeometry,
    ScenarioParams,
    generate_geometry,
    segments_intersect_box,
)
from .selection import (
    BaseAntennaSelector,
    GreedyBackwardSelector,
    GreedyForwardSelector,
    LocalParams,
    LocalRunTrace,
    LocalSelector,
    NeighborhoodTable,
    RandomSelector,
    build_neighborhoods,
    greedy_backward,
    greedy_forward,
    local_select,
    local_step,
    random_select,
)

__version__ = "0.1.0"

__all__ = [
    "BaseAntennaSelector",
    "Box",
    "CapacityReport",
    "CarrierGrid",
    "ChannelTensor",
    "DEFAULT_RHO",
    "DegenerateGeometryError",
    "GreedyBackwardSelector",
    "GreedyForwardSelector",
    "LocalParams",
    "LocalRunTrace",
    "LocalSelector",
    "NeighborhoodTable",
    "NormalizationError",
    "PerturbationSpec",
    "PlacementError",
    "PowerControl",
    "RandomSelector",
    "RunResult",
    "SPEED_OF_LIGHT",
    "ScenarioConfig",
    "ScenarioGeometry",
    "ScenarioParams",
    "SubcarrierPolicy",
    "build_channel",
    "build_neighborhoods",
    "compare_subcarrier_policies",
    "csi_robustness",
    "evaluate_selection",
    "generate_geometry",
    "greedy_backward",
    "greedy_forward",
    "load_channel_tensor",
    "local_select",
    "local_step",
    "normalize_csi",
    "perturb_csi",
    "power_factor",
    "random_select",
    "rate_delta_over_random",
    "save_channel_tensor",
    "score_selection",
    "segments_intersect_box",
    "select_subcarriers_random",
    "select_subcarriers_strongest",
    "split_seed",
    "sum_capacity_equal_power",
    "sweep_neighborhood",
    "sweep_selected_count",
    "synthesize_channel",
    "waterfill",
    "write_csv",
    "write_json",
    "zf_waterfilling_rate",
]
