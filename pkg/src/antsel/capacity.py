"""Rate metrics for antenna subsets: equal-power sum capacity and the
zero-forcing water-filling sum rate.

Per subcarrier the selected antennas form the complex matrix H of shape
(n_users, n_selected). With the total power factor f and the power split
fixed to 1/n_users per user, the equal-power sum capacity is

    C = log2 det(I + (f / n_users) H H^H)

evaluated on the small n_users x n_users Gram matrix; by the determinant
identity det(I + AB) = det(I + BA) this equals the selected-antenna-sided
form, which tests exploit as an independent oracle. The zero-forcing rate
inverts the Gram matrix for the per-user effective gains and water-fills the
power budget f over them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._validation import as_entries, check_count, check_mask, check_positive_scalar, check_subcarriers

DEFAULT_RHO = 10.0 ** (-5.0 / 10.0)
"""Default per-user SNR (linear), corresponding to -5 dB."""

ZF_CONDITION_LIMIT = 1e12
"""Gram matrices with a larger condition number count as singular for ZF."""


class PowerControl(Enum):
    """Rule fixing the total transmit power factor f.

    SNR_GAIN keeps f independent of how many antennas are on, so enlarging
    the selection raises the SNR at the users. POWER_SAVING divides f by the
    selected-antenna count, cashing in the array gain as reduced transmit
    power; under this rule switching on a redundant antenna can lower the
    achievable rate.
    """

    SNR_GAIN = "snr_gain"
    POWER_SAVING = "power_saving"


def power_factor(control: PowerControl | str, rho: float, n_selected: int, n_users: int) -> float:
    """Total transmit power factor for a selection of ``n_selected`` antennas.

    SNR_GAIN gives rho * n_users; POWER_SAVING gives rho * n_users / n_selected.

    Raises:
        ValueError: non-positive rho, bad counts, or POWER_SAVING with an
            empty selection (the factor is undefined there).
    """
    control = PowerControl(control)
    rho = check_positive_scalar(rho, name="rho")
    n_users = check_count(n_users, name="n_users", minimum=1)
    n_selected = check_count(n_selected, name="n_selected", minimum=0)
    if control is PowerControl.POWER_SAVING:
        if n_selected == 0:
            raise ValueError("power factor is undefined for an empty selection under POWER_SAVING")
        return rho * n_users / n_selected
    return rho * n_users


def _logdet2_hpd(mats: np.ndarray) -> np.ndarray:
    """log2 det of a batch of Hermitian positive-definite matrices."""
    try:
        chol = np.linalg.cholesky(mats)
    except np.linalg.LinAlgError:
        # I + PSD is positive definite in exact arithmetic; fall back only on
        # pathological rounding.
        sign, logdet = np.linalg.slogdet(mats)
        return logdet / np.log(2.0)
    diag = np.einsum("...ii->...i", chol).real
    return 2.0 * np.sum(np.log2(diag), axis=-1)


def _gram(h_stack: np.ndarray) -> np.ndarray:
    """H H^H for a (batch, n_users, n_selected) stack."""
    return h_stack @ h_stack.conj().swapaxes(-1, -2)


def _capacity_from_stack(h_stack: np.ndarray, f: float) -> np.ndarray:
    """Equal-power capacity per batch element of a (batch, n_users, m) stack."""
    batch, n_users, m = h_stack.shape
    if m == 0:
        return np.zeros(batch)
    scaled = (f / n_users) * _gram(h_stack)
    scaled[..., np.arange(n_users), np.arange(n_users)] += 1.0
    return _logdet2_hpd(scaled)


def sum_capacity_equal_power(h_sub: np.ndarray, f: float) -> float:
    """Equal-power sum capacity of one per-subcarrier selection matrix.

    Args:
        h_sub: complex (n_users, n_selected) matrix; may have zero columns.
        f: total power factor, must be positive.

    Returns:
        log2 det(I + (f / n_users) H H^H) in bits/s/Hz; 0.0 for an empty
        selection.
    """
    h = np.asarray(h_sub, dtype=np.complex128)
    if h.ndim != 2:
        raise ValueError(f"h_sub must be a 2-D matrix, got shape {h.shape}")
    if not np.isfinite(h).all():
        raise ValueError("h_sub must be finite")
    f = check_positive_scalar(f, name="f")
    if h.shape[1] == 0:
        return 0.0
    return float(_capacity_from_stack(h[None], f)[0])


def _waterfill_batch(inv_gains: np.ndarray, budget: float) -> np.ndarray:
    """Vectorised exact water-filling over rows of 1/gain values.

    For each row, returns p >= 0 with sum(p) == budget maximising
    sum log2(1 + p / inv_gain), via the active-set construction: sort by
    inverse gain, then the water level over the first j channels is
    mu_j = (budget + sum of the j smallest inverse gains) / j, and the active
    set is the largest j with mu_j above the j-th inverse gain.
    """
    batch, k = inv_gains.shape
    order = np.argsort(inv_gains, axis=1, kind="stable")
    ig_sorted = np.take_along_axis(inv_gains, order, axis=1)
    csum = np.cumsum(ig_sorted, axis=1)
    counts = np.arange(1, k + 1, dtype=np.float64)
    mu = (budget + csum) / counts
    active = mu > ig_sorted
    j_star = np.max(np.where(active, np.arange(1, k + 1), 0), axis=1)
    mu_star = np.take_along_axis(mu, j_star[:, None] - 1, axis=1)
    p_sorted = np.maximum(mu_star - ig_sorted, 0.0)
    powers = np.empty_like(p_sorted)
    np.put_along_axis(powers, order, p_sorted, axis=1)
    return powers


def waterfill(gains, budget: float) -> np.ndarray:
    """Optimal power split over parallel channels under a total budget.

    Maximises sum_k log2(1 + p_k * g_k) subject to sum(p) <= budget and
    p >= 0; the solution is p_k = max(0, mu - 1/g_k) with the water level mu
    chosen so the active channels spend the budget exactly. The active set is
    found exactly (no tolerance search).

    Args:
        gains: positive channel gains, length K >= 1.
        budget: positive total power.

    Returns:
        Power vector of the same length as ``gains``.
    """
    g = np.asarray(gains, dtype=np.float64)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("gains must be a non-empty 1-D vector")
    if not np.isfinite(g).all() or np.any(g <= 0.0):
        raise ValueError("all gains must be finite and positive")
    budget = check_positive_scalar(budget, name="budget")
    return _waterfill_batch((1.0 / g)[None], budget)[0]


def _zf_rate_from_stack(h_stack: np.ndarray, f: float, cond_limit: float = ZF_CONDITION_LIMIT) -> np.ndarray:
    """ZF water-filling rate per batch element of a (batch, n_users, m) stack."""
    batch, n_users, m = h_stack.shape
    rates = np.zeros(batch)
    if m < n_users:
        return rates
    gram = _gram(h_stack)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        cond = np.linalg.cond(gram)
    feasible = np.isfinite(cond) & (cond <= cond_limit)
    if not feasible.any():
        return rates
    inv_diag = np.einsum("...ii->...i", np.linalg.inv(gram[feasible])).real
    positive = (inv_diag > 0.0).all(axis=1)
    if not positive.all():
        # A non-positive diagonal of the inverse Gram means the matrix was
        # effectively singular despite the condition check.
        idx = np.flatnonzero(feasible)
        feasible[idx[~positive]] = False
        inv_diag = inv_diag[positive]
        if inv_diag.size == 0:
            return rates
    powers = _waterfill_batch(inv_diag, f)
    rates[feasible] = np.sum(np.log2(1.0 + powers / inv_diag), axis=1)
    return rates


def zf_waterfilling_rate(h_sub: np.ndarray, f: float, *, cond_limit: float = ZF_CONDITION_LIMIT) -> float:
    """Zero-forcing sum rate with water-filled per-user powers.

    Infeasible cases (fewer selected antennas than users, or a Gram matrix
    whose condition number exceeds ``cond_limit``) return 0.0. Otherwise the
    per-user effective gains are g_r = 1 / [(H H^H)^-1]_rr and the budget f
    is water-filled over them.

    Args:
        h_sub: complex (n_users, n_selected) matrix.
        f: total power factor, must be positive.

    Returns:
        sum_r log2(1 + p_r * g_r) in bits/s/Hz.
    """
    h = np.asarray(h_sub, dtype=np.complex128)
    if h.ndim != 2:
        raise ValueError(f"h_sub must be a 2-D matrix, got shape {h.shape}")
    if not np.isfinite(h).all():
        raise ValueError("h_sub must be finite")
    f = check_positive_scalar(f, name="f")
    return float(_zf_rate_from_stack(h[None], f, cond_limit)[0])


_METRICS = ("equal_power", "zf_waterfilling")


def _stack_columns(entries: np.ndarray, columns: np.ndarray, subcarriers: np.ndarray) -> np.ndarray:
    """Per-subcarrier selection matrices as a (len(subcarriers), n_users, m) stack."""
    return np.transpose(entries[:, columns, :][:, :, subcarriers], (2, 0, 1))


def _mean_equal_power(block: np.ndarray, columns, control: PowerControl, rho: float) -> float:
    """Mean equal-power capacity of ``columns`` over a pre-sliced block.

    ``block`` is (n_users, n_antennas, n_scored_subcarriers) with the scoring
    subcarriers already selected along the last axis. Hot path for the
    selection algorithms; inputs are assumed validated and ``control`` must
    already be a PowerControl member.
    """
    columns = np.asarray(columns, dtype=np.intp)
    if columns.size == 0:
        return 0.0
    f = rho * block.shape[0]
    if control is PowerControl.POWER_SAVING:
        f /= columns.size
    h_stack = np.transpose(block[:, columns, :], (2, 0, 1))
    return float(_capacity_from_stack(h_stack, f).mean())


def score_selection(tensor, mask, control: PowerControl | str, rho: float, subcarriers,
                    metric: str = "equal_power") -> float:
    """Mean per-subcarrier rate of a masked antenna selection.

    Args:
        tensor: ChannelTensor or raw (users, antennas, subcarriers) array.
        mask: boolean on/off vector over the antenna axis.
        control: power control rule fixing the factor f from the mask size.
        rho: per-user linear SNR.
        subcarriers: non-empty list of subcarrier indices to average over.
        metric: "equal_power" or "zf_waterfilling".

    Returns:
        Arithmetic mean of the per-subcarrier metric, in bits/s/Hz; 0.0 when
        the mask selects nothing.
    """
    entries = as_entries(tensor)
    mask = check_mask(mask, entries.shape[1])
    sub = check_subcarriers(subcarriers, entries.shape[2])
    if metric not in _METRICS:
        raise ValueError(f"metric must be one of {_METRICS}, got {metric!r}")
    columns = np.flatnonzero(mask)
    if columns.size == 0:
        return 0.0
    f = power_factor(control, rho, columns.size, entries.shape[0])
    h_stack = _stack_columns(entries, columns, sub)
    if metric == "equal_power":
        values = _capacity_from_stack(h_stack, f)
    else:
        values = _zf_rate_from_stack(h_stack, f)
    return float(values.mean())


@dataclass(frozen=True)
class CapacityReport:
    """Both rate metrics for one committed selection."""

    equal_power_capacity: float
    zf_waterfilling_rate: float
    n_selected: int
    power_control: PowerControl
    subcarrier_indices: tuple[int, ...]

    def __post_init__(self):
        if not (np.isfinite(self.equal_power_capacity) and self.equal_power_capacity >= 0.0):
            raise ValueError("equal_power_capacity must be finite and >= 0")
        if not (np.isfinite(self.zf_waterfilling_rate) and self.zf_waterfilling_rate >= 0.0):
            raise ValueError("zf_waterfilling_rate must be finite and >= 0")


def evaluate_selection(tensor, mask, control: PowerControl | str, rho: float,
                       subcarriers=None) -> CapacityReport:
    """Score a selection with both metrics in one pass.

    ``subcarriers=None`` means the full grid. The power factor is computed
    once from the mask size and shared by both metrics.
    """
    entries = as_entries(tensor)
    control = PowerControl(control)
    mask = check_mask(mask, entries.shape[1])
    if subcarriers is None:
        sub = np.arange(entries.shape[2], dtype=np.intp)
    else:
        sub = check_subcarriers(subcarriers, entries.shape[2])
    columns = np.flatnonzero(mask)
    if columns.size == 0:
        return CapacityReport(0.0, 0.0, 0, control, tuple(int(s) for s in sub))
    f = power_factor(control, rho, columns.size, entries.shape[0])
    h_stack = _stack_columns(entries, columns, sub)
    equal_power = float(_capacity_from_stack(h_stack, f).mean())
    zf_rate = float(_zf_rate_from_stack(h_stack, f).mean())
    return CapacityReport(
        equal_power_capacity=equal_power,
        zf_waterfilling_rate=zf_rate,
        n_selected=int(columns.size),
        power_control=control,
        subcarrier_indices=tuple(int(s) for s in sub),
    )
