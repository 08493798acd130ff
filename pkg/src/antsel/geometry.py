"""Scenario geometry for a distributed transmit array.

All entities live inside one axis-aligned 3-D area: transmit antennas at a
common height, single-antenna users near the ground, point scatterers spread
through the volume, and one axis-aligned box obstacle that blocks propagation
paths. Placement is seeded and reproducible: the same (parameters, seed) pair
always yields a bit-identical scenario.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import check_count, check_point, check_positions, check_seed

SPEED_OF_LIGHT = 299_792_458.0
"""Propagation speed used for path delays, in m/s."""


class PlacementError(RuntimeError):
    """Raised when the obstacle-free area cannot host the requested entities."""


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box described by its two extreme corners, in metres."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        lo = check_point(self.min_corner, name="min_corner")
        hi = check_point(self.max_corner, name="max_corner")
        if np.any(hi < lo):
            raise ValueError("max_corner must be >= min_corner on every axis")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.min_corner, other.min_corner) and np.array_equal(
            self.max_corner, other.max_corner
        )

    def __hash__(self):
        return hash((self.min_corner.tobytes(), self.max_corner.tobytes()))

    @property
    def extent(self) -> np.ndarray:
        return self.max_corner - self.min_corner

    def contains(self, points) -> np.ndarray:
        """Closed-box membership test for an (..., 3) batch of points."""
        p = np.asarray(points, dtype=np.float64)
        return np.all((p >= self.min_corner) & (p <= self.max_corner), axis=-1)

    def to_dict(self) -> dict:
        return {
            "min_corner": self.min_corner.tolist(),
            "max_corner": self.max_corner.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Box":
        return cls(np.asarray(data["min_corner"]), np.asarray(data["max_corner"]))


def segments_intersect_box(start, end, box: Box) -> np.ndarray:
    """True where the closed segment start -> end meets the box.

    Implements the slab method on the segment parameter t in [0, 1]; grazing
    contact with the box surface counts as an intersection. ``start`` and
    ``end`` broadcast against each other over a trailing axis of length 3.

    Returns:
        Boolean array with the broadcast batch shape.
    """
    start = np.asarray(start, dtype=np.float64)
    end = np.asarray(end, dtype=np.float64)
    start, end = np.broadcast_arrays(start, end)
    delta = end - start
    with np.errstate(divide="ignore", invalid="ignore"):
        t_a = (box.min_corner - start) / delta
        t_b = (box.max_corner - start) / delta
    near = np.minimum(t_a, t_b)
    far = np.maximum(t_a, t_b)
    # Axes the segment is parallel to contribute (-inf, inf) when the segment
    # lies inside that slab and an empty interval otherwise.
    parallel = delta == 0.0
    inside = (start >= box.min_corner) & (start <= box.max_corner)
    near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
    far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)
    t_enter = near.max(axis=-1)
    t_exit = far.min(axis=-1)
    return (t_enter <= t_exit) & (t_exit >= 0.0) & (t_enter <= 1.0)


@dataclass(frozen=True)
class CarrierGrid:
    """Uniform subcarrier grid centred on the carrier frequency.

    The subcarriers span exactly ``bandwidth`` hertz, from
    carrier - bandwidth/2 up to carrier + bandwidth/2.
    """

    carrier_frequency: float
    bandwidth: float
    n_subcarriers: int

    def __post_init__(self):
        if not np.isfinite(self.carrier_frequency) or self.carrier_frequency <= 0:
            raise ValueError("carrier_frequency must be positive")
        check_count(self.n_subcarriers, name="n_subcarriers", minimum=1)
        if not np.isfinite(self.bandwidth) or self.bandwidth < 0:
            raise ValueError("bandwidth must be non-negative")
        if self.n_subcarriers > 1 and self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive for more than one subcarrier")
        if self.bandwidth >= 2 * self.carrier_frequency:
            raise ValueError("bandwidth too large: lowest subcarrier frequency would be <= 0")

    @property
    def subcarrier_frequencies(self) -> np.ndarray:
        """Strictly increasing frequencies, one per subcarrier, in Hz."""
        if self.n_subcarriers == 1:
            return np.array([self.carrier_frequency])
        half = self.bandwidth / 2.0
        return np.linspace(
            self.carrier_frequency - half, self.carrier_frequency + half, self.n_subcarriers
        )


DEFAULT_AREA = Box(np.array([0.0, 0.0, 0.0]), np.array([250.0, 250.0, 40.0]))
DEFAULT_OBSTACLE = Box(np.array([100.0, 100.0, 0.0]), np.array([150.0, 150.0, 25.0]))


@dataclass(frozen=True)
class ScenarioParams:
    """Counts, bounds and heights used to draw one random scenario.

    The obstacle location, area size and entity heights are not pinned by any
    physical data set; the defaults give a 250 m x 250 m service area with a
    large central building, and every field can be overridden.
    """

    n_tx: int = 64
    n_users: int = 8
    n_scatterers: int = 75
    area: Box = DEFAULT_AREA
    obstacle: Box = DEFAULT_OBSTACLE
    tx_height: float = 35.0
    user_height: float = 1.5
    max_placement_tries: int = 10_000

    def __post_init__(self):
        check_count(self.n_tx, name="n_tx", minimum=1)
        check_count(self.n_users, name="n_users", minimum=1)
        check_count(self.n_scatterers, name="n_scatterers", minimum=0)
        check_count(self.max_placement_tries, name="max_placement_tries", minimum=1)
        z_lo, z_hi = self.area.min_corner[2], self.area.max_corner[2]
        for name, h in (("tx_height", self.tx_height), ("user_height", self.user_height)):
            if not z_lo <= float(h) <= z_hi:
                raise ValueError(f"{name}={h} lies outside the area's z range [{z_lo}, {z_hi}]")

    def to_dict(self) -> dict:
        return {
            "n_tx": self.n_tx,
            "n_users": self.n_users,
            "n_scatterers": self.n_scatterers,
            "area": self.area.to_dict(),
            "obstacle": self.obstacle.to_dict(),
            "tx_height": self.tx_height,
            "user_height": self.user_height,
            "max_placement_tries": self.max_placement_tries,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioParams":
        known = {
            "n_tx", "n_users", "n_scatterers", "area", "obstacle",
            "tx_height", "user_height", "max_placement_tries",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "area" in kwargs:
            kwargs["area"] = Box.from_dict(kwargs["area"])
        if "obstacle" in kwargs:
            kwargs["obstacle"] = Box.from_dict(kwargs["obstacle"])
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class ScenarioGeometry:
    """Fixed positions of every entity in one scenario drop."""

    tx_positions: np.ndarray
    user_positions: np.ndarray
    scatterer_positions: np.ndarray
    obstacle: Box
    area_bounds: Box

    def __post_init__(self):
        tx = check_positions(self.tx_positions, name="tx_positions")
        users = check_positions(self.user_positions, name="user_positions")
        scat = check_positions(
            self.scatterer_positions, name="scatterer_positions", allow_empty=True
        )
        for name, arr in (("tx", tx), ("user", users), ("scatterer", scat)):
            if arr.shape[0] and not self.area_bounds.contains(arr).all():
                raise ValueError(f"{name} positions must lie inside area_bounds")
        if np.unique(tx, axis=0).shape[0] != tx.shape[0]:
            raise ValueError("tx_positions must be pairwise distinct")
        for arr in (tx, users, scat):
            arr.setflags(write=False)
        object.__setattr__(self, "tx_positions", tx)
        object.__setattr__(self, "user_positions", users)
        object.__setattr__(self, "scatterer_positions", scat)

    @property
    def n_tx(self) -> int:
        return self.tx_positions.shape[0]

    @property
    def n_users(self) -> int:
        return self.user_positions.shape[0]

    @property
    def n_scatterers(self) -> int:
        return self.scatterer_positions.shape[0]

    def to_json(self) -> str:
        """Serialize to a JSON document with [x, y, z] triples per entity class."""
        doc = {
            "tx_positions": self.tx_positions.tolist(),
            "user_positions": self.user_positions.tolist(),
            "scatterer_positions": self.scatterer_positions.tolist(),
            "obstacle": self.obstacle.to_dict(),
            "area_bounds": self.area_bounds.to_dict(),
        }
        return json.dumps(doc, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioGeometry":
        doc = json.loads(text)
        known = {"tx_positions", "user_positions", "scatterer_positions", "obstacle", "area_bounds"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown geometry keys: {sorted(unknown)}")
        return cls(
            tx_positions=np.asarray(doc["tx_positions"], dtype=np.float64).reshape(-1, 3),
            user_positions=np.asarray(doc["user_positions"], dtype=np.float64).reshape(-1, 3),
            scatterer_positions=np.asarray(doc["scatterer_positions"], dtype=np.float64).reshape(-1, 3),
            obstacle=Box.from_dict(doc["obstacle"]),
            area_bounds=Box.from_dict(doc["area_bounds"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ScenarioGeometry":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _draw_points(
    rng: np.random.Generator,
    n: int,
    params: ScenarioParams,
    *,
    fixed_z: float | None,
    distinct: bool = False,
) -> np.ndarray:
    """Draw n points uniformly in the area, rejecting any inside the obstacle."""
    area = params.area
    lo, hi = area.min_corner, area.max_corner
    points: list[tuple[float, float, float]] = []
    for _ in range(n):
        for _try in range(params.max_placement_tries):
            x = rng.uniform(lo[0], hi[0])
            y = rng.uniform(lo[1], hi[1])
            z = float(fixed_z) if fixed_z is not None else rng.uniform(lo[2], hi[2])
            candidate = (x, y, z)
            if bool(params.obstacle.contains(np.array(candidate))):
                continue
            if distinct and candidate in points:
                continue
            points.append(candidate)
            break
        else:
            raise PlacementError(
                f"could not place point {len(points) + 1} of {n} outside the obstacle "
                f"after {params.max_placement_tries} tries"
            )
    return np.array(points, dtype=np.float64).reshape(n, 3)


def generate_geometry(params: ScenarioParams, seed: int) -> ScenarioGeometry:
    """Draw one reproducible scenario.

    Antennas are placed uniformly at random at the common height
    ``params.tx_height``; users at ``params.user_height``; scatterers
    uniformly in the full volume. Points falling inside the obstacle are
    redrawn. The draw order is antennas, then users, then scatterers, so the
    output is a pure function of (params, seed).

    Raises:
        PlacementError: a point could not be placed outside the obstacle
            within ``params.max_placement_tries`` attempts.
    """
    seed = check_seed(seed)
    rng = np.random.default_rng(seed)
    tx = _draw_points(rng, params.n_tx, params, fixed_z=params.tx_height, distinct=True)
    users = _draw_points(rng, params.n_users, params, fixed_z=params.user_height)
    scatterers = _draw_points(rng, params.n_scatterers, params, fixed_z=None)
    return ScenarioGeometry(
        tx_positions=tx,
        user_positions=users,
        scatterer_positions=scatterers,
        obstacle=params.obstacle,
        area_bounds=params.area,
    )
