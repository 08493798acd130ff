"""Multipath channel synthesis and handling of the channel-state tensor.

The channel between every (user, antenna) pair and on every subcarrier is the
coherent sum of a direct ray plus one single-bounce ray per scatterer. A ray
is dropped when its segment crosses the obstacle box. The resulting complex
gains are stored as a (n_users, n_antennas, n_subcarriers) tensor that can be
normalised to unit average energy, perturbed to emulate imperfect channel
knowledge, restricted to subcarrier subsets, and written to a compact binary
interchange format.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import as_entries, check_count, check_seed
from .geometry import SPEED_OF_LIGHT, CarrierGrid, ScenarioGeometry, segments_intersect_box


class DegenerateGeometryError(ValueError):
    """Raised when coincident points give a propagation path of zero length."""


class NormalizationError(ValueError):
    """Raised when a tensor cannot be scaled to unit average energy."""


_NORMALIZED_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ChannelTensor:
    """Complex channel gains indexed (user, antenna, subcarrier).

    Instances are immutable; the entry array is stored read-only. When
    ``normalized`` is set, the mean squared magnitude over all entries is 1
    (within 1e-9).
    """

    entries: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.complex128, order="C")
        if entries.ndim != 3:
            raise ValueError(f"entries must be 3-D (users, antennas, subcarriers), got {entries.shape}")
        if not np.isfinite(entries).all():
            raise ValueError("entries must all be finite")
        if self.normalized and abs(self.mean_power(entries) - 1.0) > _NORMALIZED_TOL:
            raise ValueError("normalized tensor must have unit mean squared magnitude")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @staticmethod
    def mean_power(entries: np.ndarray) -> float:
        """Mean of |entry|^2 over all (user, antenna, subcarrier) cells."""
        return float(np.mean(entries.real**2 + entries.imag**2))

    @property
    def n_users(self) -> int:
        return self.entries.shape[0]

    @property
    def n_tx(self) -> int:
        return self.entries.shape[1]

    @property
    def n_subcarriers(self) -> int:
        return self.entries.shape[2]


def synthesize_channel(geometry: ScenarioGeometry, grid: CarrierGrid) -> ChannelTensor:
    """Build the unnormalised channel tensor for one scenario.

    Each entry is sum_p a_p * exp(-j 2 pi f d_p / c) over the surviving rays p:
    the direct ray (amplitude 1/d) when its tx-user segment misses the
    obstacle, and one ray per scatterer (amplitude 1/(d1*d2), length d1+d2)
    when both hops miss the obstacle. Rays are accumulated direct-ray first,
    then in scatterer index order, so the result is bit-reproducible.

    Raises:
        DegenerateGeometryError: two relevant entities coincide, giving a
            zero-length path segment.
    """
    tx = geometry.tx_positions
    users = geometry.user_positions
    scat = geometry.scatterer_positions
    n_tx, n_users, n_scat = geometry.n_tx, geometry.n_users, geometry.n_scatterers
    freqs = grid.subcarrier_frequencies

    d_tu = np.linalg.norm(users[:, None, :] - tx[None, :, :], axis=-1)  # (n_users, n_tx)
    if np.any(d_tu == 0.0):
        raise DegenerateGeometryError("a transmit antenna coincides with a user")
    blocked_tu = segments_intersect_box(tx[None, :, :], users[:, None, :], geometry.obstacle)

    if n_scat:
        d_ts = np.linalg.norm(tx[:, None, :] - scat[None, :, :], axis=-1)  # (n_tx, n_scat)
        d_su = np.linalg.norm(users[:, None, :] - scat[None, :, :], axis=-1)  # (n_users, n_scat)
        if np.any(d_ts == 0.0) or np.any(d_su == 0.0):
            raise DegenerateGeometryError("a scatterer coincides with an antenna or user")
        blocked_ts = segments_intersect_box(tx[:, None, :], scat[None, :, :], geometry.obstacle)
        blocked_su = segments_intersect_box(scat[None, :, :], users[:, None, :], geometry.obstacle)

    phase_rate = (-2j * np.pi / SPEED_OF_LIGHT) * freqs  # (n_subcarriers,)
    entries = np.empty((n_users, n_tx, grid.n_subcarriers), dtype=np.complex128)
    for r in range(n_users):
        direct_len = d_tu[r][:, None]  # (n_tx, 1)
        direct_amp = np.where(blocked_tu[r][:, None], 0.0, 1.0 / direct_len)
        if n_scat:
            bounce_len = d_ts + d_su[r][None, :]  # (n_tx, n_scat)
            bounce_open = ~(blocked_ts | blocked_su[r][None, :])
            bounce_amp = np.where(bounce_open, 1.0 / (d_ts * d_su[r][None, :]), 0.0)
            lengths = np.concatenate([direct_len, bounce_len], axis=1)
            amps = np.concatenate([direct_amp, bounce_amp], axis=1)
        else:
            lengths = direct_len
            amps = direct_amp
        rays = np.exp(lengths[:, :, None] * phase_rate[None, None, :])
        entries[r] = np.einsum("tp,tpc->tc", amps, rays)
    return ChannelTensor(entries, normalized=False)


def normalize_csi(tensor: ChannelTensor) -> ChannelTensor:
    """Scale the tensor by one global constant to unit average energy.

    Raises:
        NormalizationError: every entry is zero.
    """
    mean_power = ChannelTensor.mean_power(tensor.entries)
    if mean_power == 0.0:
        raise NormalizationError("cannot normalise an all-zero tensor")
    return ChannelTensor(tensor.entries / np.sqrt(mean_power), normalized=True)


@dataclass(frozen=True)
class PerturbationSpec:
    """Seeded multiplicative error model for imperfect channel knowledge.

    Every entry is multiplied by (1 + u) with u drawn independently and
    uniformly from [-relative_magnitude, +relative_magnitude].
    """

    relative_magnitude: float
    seed: int = 0

    def __post_init__(self):
        m = float(self.relative_magnitude)
        if not 0.0 <= m < 1.0:
            raise ValueError("relative_magnitude must lie in [0, 1)")
        check_seed(self.seed)


def perturb_csi(tensor: ChannelTensor, spec: PerturbationSpec) -> ChannelTensor:
    """Apply the multiplicative measurement-error model to a normalised tensor.

    The output keeps the perturbed values as-is (it is not re-normalised) and
    is a pure function of (tensor, spec).
    """
    if not tensor.normalized:
        raise ValueError("perturb_csi expects a normalised tensor")
    rng = np.random.default_rng(spec.seed)
    m = float(spec.relative_magnitude)
    factors = 1.0 + rng.uniform(-m, m, size=tensor.entries.shape)
    return ChannelTensor(tensor.entries * factors, normalized=False)


def _random_subcarrier_subset(rng: np.random.Generator, n_subcarriers: int, fraction: float) -> np.ndarray:
    count = int(round(fraction * n_subcarriers))
    if count == 0:
        raise ValueError(
            f"fraction {fraction} of {n_subcarriers} subcarriers rounds to an empty subset"
        )
    picked = rng.choice(n_subcarriers, size=count, replace=False)
    return np.sort(picked.astype(np.intp))


def select_subcarriers_random(n_subcarriers: int, fraction: float, seed: int) -> np.ndarray:
    """Sample round(fraction * n_subcarriers) distinct indices uniformly.

    Returns the indices sorted ascending; deterministic per seed.

    Raises:
        ValueError: fraction outside (0, 1] or so small the subset is empty.
    """
    check_count(n_subcarriers, name="n_subcarriers", minimum=1)
    fraction = float(fraction)
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    rng = np.random.default_rng(check_seed(seed))
    return _random_subcarrier_subset(rng, n_subcarriers, fraction)


def select_subcarriers_strongest(tensor, count: int) -> np.ndarray:
    """Pick the ``count`` subcarriers with the largest mean power over all cells.

    Mean power is taken over every (user, antenna) pair; ties rank the lower
    index first. Returns the selected indices sorted ascending.
    """
    entries = as_entries(tensor)
    n_subcarriers = entries.shape[2]
    check_count(count, name="count", minimum=1, maximum=n_subcarriers)
    power = np.mean(entries.real**2 + entries.imag**2, axis=(0, 1))
    ranking = np.argsort(-power, kind="stable")
    return np.sort(ranking[:count].astype(np.intp))


@dataclass(frozen=True)
class SubcarrierPolicy:
    """How a selection algorithm chooses the subcarriers it scores on.

    Kinds:
      * ``full``: every subcarrier, every iteration.
      * ``random``: a fresh uniform subset of round(fraction * total) indices
        per draw, so repeated draws cover most of the band over time.
      * ``strongest``: the fixed ``count`` subcarriers with the largest mean
        power (clamped to the grid size).
    """

    kind: str = "full"
    fraction: float | None = None
    count: int | None = None

    def __post_init__(self):
        if self.kind == "full":
            if self.fraction is not None or self.count is not None:
                raise ValueError("full policy takes no fraction or count")
        elif self.kind == "random":
            if self.fraction is None or not 0.0 < float(self.fraction) <= 1.0:
                raise ValueError("random policy needs a fraction in (0, 1]")
            if self.count is not None:
                raise ValueError("random policy takes no count")
        elif self.kind == "strongest":
            if self.count is None or int(self.count) < 1:
                raise ValueError("strongest policy needs a positive count")
            if self.fraction is not None:
                raise ValueError("strongest policy takes no fraction")
        else:
            raise ValueError(f"unknown subcarrier policy kind: {self.kind!r}")

    @classmethod
    def full(cls) -> "SubcarrierPolicy":
        return cls(kind="full")

    @classmethod
    def random_fraction(cls, fraction: float) -> "SubcarrierPolicy":
        return cls(kind="random", fraction=float(fraction))

    @classmethod
    def strongest(cls, count: int) -> "SubcarrierPolicy":
        return cls(kind="strongest", count=int(count))

    @property
    def fresh_each_iteration(self) -> bool:
        return self.kind == "random"

    @property
    def label(self) -> str:
        if self.kind == "random":
            return f"random_{self.fraction:g}"
        if self.kind == "strongest":
            return f"strongest_{self.count}"
        return "full"

    def resolve(self, tensor, rng: np.random.Generator | None = None) -> np.ndarray:
        """Concrete sorted index list for one scoring pass over ``tensor``."""
        entries = as_entries(tensor, check_finite=False)
        n_subcarriers = entries.shape[2]
        if self.kind == "full":
            return np.arange(n_subcarriers, dtype=np.intp)
        if self.kind == "strongest":
            return select_subcarriers_strongest(entries, min(int(self.count), n_subcarriers))
        if rng is None:
            raise ValueError("random subcarrier policy needs an RNG stream")
        return _random_subcarrier_subset(rng, n_subcarriers, float(self.fraction))

    def to_dict(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.fraction is not None:
            doc["fraction"] = self.fraction
        if self.count is not None:
            doc["count"] = self.count
        return doc

    @classmethod
    def from_dict(cls, data: dict) -> "SubcarrierPolicy":
        unknown = set(data) - {"kind", "fraction", "count"}
        if unknown:
            raise ValueError(f"unknown subcarrier policy keys: {sorted(unknown)}")
        return cls(**data)


_TENSOR_MAGIC = int.from_bytes(b"CHT1", "little")
_TENSOR_VERSION = 1
_HEADER = struct.Struct("<5I")


def save_channel_tensor(tensor: ChannelTensor, path) -> None:
    """Write the binary interchange format.

    Layout: five unsigned 32-bit little-endian words (magic ``CHT1``, format
    version, n_users, n_antennas, n_subcarriers) followed by the entries in
    row-major (user, antenna, subcarrier) order as little-endian IEEE-754
    64-bit (real, imag) pairs.
    """
    header = _HEADER.pack(
        _TENSOR_MAGIC, _TENSOR_VERSION, tensor.n_users, tensor.n_tx, tensor.n_subcarriers
    )
    payload = np.ascontiguousarray(tensor.entries).astype("<c16", copy=False).tobytes()
    Path(path).write_bytes(header + payload)


def load_channel_tensor(path) -> ChannelTensor:
    """Read the binary interchange format written by save_channel_tensor.

    The normalised flag is not stored in the file; it is re-derived from the
    data (mean squared magnitude within 1e-9 of 1).
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated tensor file")
    magic, version, n_users, n_tx, n_subcarriers = _HEADER.unpack_from(raw)
    if magic != _TENSOR_MAGIC:
        raise ValueError(f"{path}: not a channel tensor file (bad magic)")
    if version != _TENSOR_VERSION:
        raise ValueError(f"{path}: unsupported tensor format version {version}")
    expected = _HEADER.size + n_users * n_tx * n_subcarriers * 16
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    entries = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    entries = entries.reshape(n_users, n_tx, n_subcarriers)
    normalized = abs(ChannelTensor.mean_power(entries) - 1.0) <= _NORMALIZED_TOL
    return ChannelTensor(entries, normalized=normalized)
