"""Shared fixtures: one small scenario reused across the unit tests."""

import numpy as np
import pytest

from antsel.channel import normalize_csi, synthesize_channel
from antsel.geometry import Box, CarrierGrid, ScenarioParams, generate_geometry


def complex_randn(rng, *shape):
    """Unit-variance circularly symmetric complex samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@pytest.fixture(scope="session")
def small_params():
    return ScenarioParams(
        n_tx=12,
        n_users=3,
        n_scatterers=10,
        area=Box([0.0, 0.0, 0.0], [120.0, 120.0, 30.0]),
        obstacle=Box([50.0, 50.0, 0.0], [70.0, 70.0, 18.0]),
        tx_height=25.0,
        user_height=1.5,
    )


@pytest.fixture(scope="session")
def small_grid():
    return CarrierGrid(2.6e9, 20e6, 16)


@pytest.fixture(scope="session")
def small_geometry(small_params):
    return generate_geometry(small_params, seed=11)


@pytest.fixture(scope="session")
def small_tensor(small_geometry, small_grid):
    return normalize_csi(synthesize_channel(small_geometry, small_grid))
