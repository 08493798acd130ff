"""Antenna-subset selection algorithms.

The core algorithm is a self-organising local rule: every antenna looks only
at its k nearest neighbours, compares the capacity of the currently-on
neighbour set with and without itself, and proposes to switch on exactly when
joining strictly helps. All antennas update synchronously from the same
snapshot, a small per-antenna mutation probability occasionally inverts a
proposal to escape local maxima, and after a fixed number of iterations the
best-scoring flag state seen is committed.

Greedy forward/backward and uniform random selection are provided as
baselines. Each algorithm is exposed both as a plain function and as a
scikit-learn style estimator whose ``fit`` learns a boolean ``support_`` over
the antenna axis and whose ``transform`` restricts a channel tensor to the
selected antennas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    as_entries,
    check_count,
    check_mask,
    check_positions,
    check_positive_scalar,
    check_seed,
    check_subcarriers,
)
from .capacity import DEFAULT_RHO, PowerControl, _logdet2_hpd, _mean_equal_power
from .channel import SubcarrierPolicy


@dataclass(frozen=True, eq=False)
class NeighborhoodTable:
    """Per-antenna list of the k nearest other antennas, nearest first."""

    neighbors: np.ndarray  # (n_antennas, k) int

    def __post_init__(self):
        arr = np.asarray(self.neighbors)
        if arr.ndim != 2 or not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("neighbors must be a 2-D integer array")
        n, k = arr.shape
        if not 1 <= k <= n - 1:
            raise ValueError(f"neighbourhood size {k} must lie in [1, {n - 1}]")
        if arr.min() < 0 or arr.max() >= n:
            raise ValueError("neighbour indices out of range")
        rows = np.arange(n)[:, None]
        if np.any(arr == rows):
            raise ValueError("an antenna cannot be its own neighbour")
        arr = arr.astype(np.intp, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "neighbors", arr)

    @property
    def n_antennas(self) -> int:
        return self.neighbors.shape[0]

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]


def build_neighborhoods(tx_positions, k: int) -> NeighborhoodTable:
    """Exact k-nearest-neighbour table over the antenna positions.

    Each row lists the k nearest other antennas by Euclidean distance in
    ascending order, distance ties broken towards the lower index.
    """
    positions = check_positions(tx_positions, name="tx_positions")
    n = positions.shape[0]
    check_count(k, name="k", minimum=1, maximum=n - 1)
    if np.unique(positions, axis=0).shape[0] != n:
        raise ValueError("tx_positions must be pairwise distinct")
    diff = positions[:, None, :] - positions[None, :, :]
    dist_sq = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(dist_sq, np.inf)
    # Stable sort keeps equal distances in index order.
    order = np.argsort(dist_sq, axis=1, kind="stable")
    return NeighborhoodTable(order[:, :k])


@dataclass(frozen=True)
class LocalParams:
    """Tuning knobs of the local self-organising selection run.

    ``mutation_prob=None`` defaults to 1/n_antennas at run time (one expected
    inversion per iteration) and ``n_init=None`` to half the antennas.
    """

    n_neighbors: int
    mutation_prob: float | None = None
    n_iterations: int = 30
    n_init: int | None = None
    subcarriers: SubcarrierPolicy = SubcarrierPolicy.full()
    seed: int = 0

    def __post_init__(self):
        check_count(self.n_neighbors, name="n_neighbors", minimum=1)
        check_count(self.n_iterations, name="n_iterations", minimum=1)
        if self.mutation_prob is not None and not 0.0 <= float(self.mutation_prob) <= 1.0:
            raise ValueError("mutation_prob must lie in [0, 1]")
        if self.n_init is not None:
            check_count(self.n_init, name="n_init", minimum=0)
        check_seed(self.seed)

    def to_dict(self) -> dict:
        return {
            "n_neighbors": self.n_neighbors,
            "mutation_prob": self.mutation_prob,
            "n_iterations": self.n_iterations,
            "n_init": self.n_init,
            "subcarriers": self.subcarriers.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LocalParams":
        known = {"n_neighbors", "mutation_prob", "n_iterations", "n_init", "subcarriers", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown local parameter keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "subcarriers" in kwargs:
            kwargs["subcarriers"] = SubcarrierPolicy.from_dict(kwargs["subcarriers"])
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class LocalRunTrace:
    """Per-iteration record of one local selection run.

    ``committed_mask`` is the flag vector of the globally best-scoring
    iteration (earliest iteration on ties).
    """

    flags: np.ndarray          # (n_iterations, n_antennas) bool
    global_scores: np.ndarray  # (n_iterations,) equal-power capacity, full band
    mutated: tuple             # per iteration: indices whose proposal was inverted
    subcarrier_sets: tuple     # per iteration: indices scored by the local rule
    best_iteration: int
    committed_mask: np.ndarray

    @property
    def n_iterations(self) -> int:
        return self.flags.shape[0]

    @property
    def sizes(self) -> np.ndarray:
        """Number of flags on after each iteration."""
        return self.flags.sum(axis=1)


def _local_proposals(block: np.ndarray, flags: np.ndarray, neighbors: np.ndarray,
                     rho: float) -> np.ndarray:
    """Synchronous join/leave proposals for every antenna.

    For antenna i with on-neighbours S_i, propose on exactly when the mean
    capacity of S_i plus i strictly exceeds that of S_i alone. Both sides use
    the POWER_SAVING factor, which makes the comparison reject antennas that
    add transmit power but no new information. All comparisons read the same
    input ``flags`` snapshot, so the result does not depend on antenna order.

    Each antenna needs two capacities; both Gram matrices are formed by their
    own matrix product (keeping exact ties, e.g. for duplicated columns,
    bit-exact) and share a single stacked Cholesky factorisation.
    """
    n_users, _, n_sub = block.shape
    n_tx = flags.shape[0]
    rho_total = rho * n_users
    diag = np.arange(n_users)
    proposals = np.empty(n_tx, dtype=bool)
    for i in range(n_tx):
        members = neighbors[i][flags[neighbors[i]]]
        m = members.size
        cols = np.empty(m + 1, dtype=np.intp)
        cols[:m] = members
        cols[m] = i
        h_with = np.transpose(block[:, cols, :], (2, 0, 1))  # (n_sub, n_users, m + 1)
        gram_with = h_with @ h_with.conj().swapaxes(-1, -2)
        if m == 0:
            scaled = (rho_total / n_users) * gram_with
            scaled[:, diag, diag] += 1.0
            # An empty neighbour set scores 0, so joining needs capacity > 0.
            proposals[i] = float(_logdet2_hpd(scaled).mean()) > 0.0
            continue
        h_without = h_with[:, :, :m]
        gram_without = h_without @ h_without.conj().swapaxes(-1, -2)
        stacked = np.concatenate(
            [
                (rho_total / (m + 1) / n_users) * gram_with,
                (rho_total / m / n_users) * gram_without,
            ]
        )
        stacked[:, diag, diag] += 1.0
        values = _logdet2_hpd(stacked)
        proposals[i] = float(values[:n_sub].mean()) > float(values[n_sub:].mean())
    return proposals


def _local_step_impl(block, flags, neighbors, rho, rng, mutation_prob):
    proposals = _local_proposals(block, flags, neighbors, rho)
    # One uniform draw per antenna, consumed in ascending index order.
    mutate = rng.random(flags.shape[0]) < mutation_prob
    return proposals ^ mutate, np.flatnonzero(mutate)


def local_step(tensor, flags, table: NeighborhoodTable, rho: float, subcarriers,
               rng: np.random.Generator, mutation_prob: float = 0.0) -> np.ndarray:
    """One synchronous update of all antenna flags.

    Args:
        tensor: channel tensor (or raw array).
        flags: current on/off vector, read-only for the whole step.
        table: neighbourhood table matching the tensor's antenna count.
        rho: per-user linear SNR.
        subcarriers: indices the local comparisons average over.
        rng: stream supplying one mutation draw per antenna, in ascending
            antenna order.
        mutation_prob: probability of inverting each antenna's proposal.

    Returns:
        The next flag vector.
    """
    entries = as_entries(tensor)
    flags = check_mask(flags, entries.shape[1], name="flags")
    if table.n_antennas != entries.shape[1]:
        raise ValueError("neighbourhood table does not match the tensor's antenna count")
    sub = check_subcarriers(subcarriers, entries.shape[2])
    rho = check_positive_scalar(rho, name="rho")
    if not 0.0 <= float(mutation_prob) <= 1.0:
        raise ValueError("mutation_prob must lie in [0, 1]")
    block = entries[:, :, sub]
    new_flags, _ = _local_step_impl(block, flags, table.neighbors, rho, rng, float(mutation_prob))
    return new_flags


def local_select(tensor, table: NeighborhoodTable, params: LocalParams, rho: float,
                 scoring_control: PowerControl | str) -> LocalRunTrace:
    """Run the local selection for ``params.n_iterations`` and commit the best state.

    Starts from exactly ``n_init`` uniformly chosen flags on. Under the
    ``random`` subcarrier policy a fresh subset is drawn before every
    iteration, so successive iterations see different parts of the band.
    After each iteration the current flag vector is scored globally with
    equal-power capacity under ``scoring_control`` over the full subcarrier
    grid; the committed mask is the best-scoring iteration's flag vector.

    The run is a pure function of its arguments. RNG draws happen in a fixed
    order per iteration: subcarrier subset first (random policy only), then
    one mutation draw per antenna in ascending index order.
    """
    entries = as_entries(tensor)
    n_users, n_tx, n_subcarriers = entries.shape
    scoring_control = PowerControl(scoring_control)
    rho = check_positive_scalar(rho, name="rho")
    if table.n_antennas != n_tx:
        raise ValueError("neighbourhood table does not match the tensor's antenna count")
    if table.k != params.n_neighbors:
        raise ValueError(
            f"table was built for k={table.k} but params request n_neighbors={params.n_neighbors}"
        )
    check_count(params.n_neighbors, name="n_neighbors", minimum=1, maximum=n_tx - 1)
    mutation_prob = 1.0 / n_tx if params.mutation_prob is None else float(params.mutation_prob)
    n_init = n_tx // 2 if params.n_init is None else int(params.n_init)
    check_count(n_init, name="n_init", minimum=0, maximum=n_tx)

    rng = np.random.default_rng(params.seed)
    flags = np.zeros(n_tx, dtype=bool)
    flags[rng.permutation(n_tx)[:n_init]] = True

    policy = params.subcarriers
    fixed_sub = None if policy.fresh_each_iteration else policy.resolve(entries)
    all_columns_block = entries  # global scoring uses the full grid

    n_iter = params.n_iterations
    flags_hist = np.empty((n_iter, n_tx), dtype=bool)
    scores = np.empty(n_iter)
    mutated: list[np.ndarray] = []
    sub_sets: list[np.ndarray] = []
    for it in range(n_iter):
        sub = policy.resolve(entries, rng) if fixed_sub is None else fixed_sub
        block = entries[:, :, sub]
        flags, mutated_idx = _local_step_impl(
            block, flags, table.neighbors, rho, rng, mutation_prob
        )
        flags_hist[it] = flags
        scores[it] = _mean_equal_power(
            all_columns_block, np.flatnonzero(flags), scoring_control, rho
        )
        mutated.append(mutated_idx)
        sub_sets.append(sub)
    best = int(np.argmax(scores))
    return LocalRunTrace(
        flags=flags_hist,
        global_scores=scores,
        mutated=tuple(mutated),
        subcarrier_sets=tuple(sub_sets),
        best_iteration=best,
        committed_mask=flags_hist[best].copy(),
    )


def _prepare_block(tensor, subcarriers):
    entries = as_entries(tensor)
    if subcarriers is None:
        sub = np.arange(entries.shape[2], dtype=np.intp)
    else:
        sub = check_subcarriers(subcarriers, entries.shape[2])
    return entries[:, :, sub], entries.shape[1]


def greedy_forward_path(tensor, rho: float, control: PowerControl | str,
                        subcarriers=None, n_target: int | None = None) -> np.ndarray:
    """Antennas in the order greedy forward selection adds them.

    Each step adds the antenna maximising the mean equal-power capacity of
    the enlarged set under ``control`` (whose factor shrinks with set size
    under POWER_SAVING); score ties resolve to the lowest antenna index.
    """
    block, n_tx = _prepare_block(tensor, subcarriers)
    control = PowerControl(control)
    rho = check_positive_scalar(rho, name="rho")
    n_target = n_tx if n_target is None else check_count(n_target, name="n_target", minimum=1, maximum=n_tx)
    selected: list[int] = []
    remaining = list(range(n_tx))
    for _ in range(n_target):
        best_score = -np.inf
        best_j = remaining[0]
        for j in remaining:
            score = _mean_equal_power(block, selected + [j], control, rho)
            if score > best_score:
                best_score = score
                best_j = j
        selected.append(best_j)
        remaining.remove(best_j)
    return np.array(selected, dtype=np.intp)


def greedy_forward(tensor, n_target: int, rho: float, control: PowerControl | str,
                   subcarriers=None) -> np.ndarray:
    """Boolean mask of the first ``n_target`` greedy-forward picks."""
    order = greedy_forward_path(tensor, rho, control, subcarriers, n_target=n_target)
    n_tx = as_entries(tensor, check_finite=False).shape[1]
    mask = np.zeros(n_tx, dtype=bool)
    mask[order] = True
    return mask


def greedy_backward_path(tensor, rho: float, control: PowerControl | str,
                         subcarriers=None) -> np.ndarray:
    """Antennas in the order greedy backward selection removes them.

    Starting from the full set, each step removes the antenna whose removal
    leaves the highest-scoring remainder (the least-contributing antenna);
    ties resolve to the lowest antenna index. The path stops when one antenna
    remains, so its length is n_antennas - 1.
    """
    block, n_tx = _prepare_block(tensor, subcarriers)
    control = PowerControl(control)
    rho = check_positive_scalar(rho, name="rho")
    current = list(range(n_tx))
    removals: list[int] = []
    while len(current) > 1:
        best_score = -np.inf
        best_j = current[0]
        for j in current:
            rest = [a for a in current if a != j]
            score = _mean_equal_power(block, rest, control, rho)
            if score > best_score:
                best_score = score
                best_j = j
        removals.append(best_j)
        current.remove(best_j)
    return np.array(removals, dtype=np.intp)


def greedy_backward(tensor, n_target: int, rho: float, control: PowerControl | str,
                    subcarriers=None) -> np.ndarray:
    """Boolean mask after greedy backward removal down to ``n_target`` antennas."""
    n_tx = as_entries(tensor, check_finite=False).shape[1]
    check_count(n_target, name="n_target", minimum=1, maximum=n_tx)
    removals = greedy_backward_path(tensor, rho, control, subcarriers)
    mask = np.ones(n_tx, dtype=bool)
    mask[removals[: n_tx - n_target]] = False
    return mask


def random_select(n_target: int, n_total: int, seed: int) -> np.ndarray:
    """Uniform random n_target-subset as a boolean mask; deterministic per seed."""
    check_count(n_total, name="n_total", minimum=1)
    check_count(n_target, name="n_target", minimum=0, maximum=n_total)
    rng = np.random.default_rng(check_seed(seed))
    mask = np.zeros(n_total, dtype=bool)
    mask[rng.permutation(n_total)[:n_target]] = True
    return mask


class BaseAntennaSelector(BaseEstimator):
    """Base class for antenna-subset selectors.

    Subclasses implement ``fit(X, ...)`` on a channel tensor X of shape
    (n_users, n_antennas, n_subcarriers) (a ChannelTensor or a raw complex
    array) and set ``support_``, a boolean mask over the antenna axis.
    ``transform`` then restricts a tensor to the selected antennas, mirroring
    scikit-learn's feature selection over axis 1.
    """

    def get_support(self, indices: bool = False) -> np.ndarray:
        """The learned antenna mask, or the selected indices if requested."""
        check_is_fitted(self, "support_")
        return np.flatnonzero(self.support_) if indices else self.support_.copy()

    def transform(self, X) -> np.ndarray:
        """Restrict X to the selected antennas along axis 1."""
        check_is_fitted(self, "support_")
        entries = as_entries(X, check_finite=False)
        if entries.shape[1] != self.support_.shape[0]:
            raise ValueError(
                f"X has {entries.shape[1]} antennas but the selector was fitted on "
                f"{self.support_.shape[0]}"
            )
        return entries[:, self.support_, :]

    def fit_transform(self, X, y=None, **fit_params) -> np.ndarray:
        return self.fit(X, y, **fit_params).transform(X)


class GreedyForwardSelector(BaseAntennaSelector):
    """Greedy add-one-at-a-time antenna selection.

    Starts from an empty set and repeatedly adds the antenna contributing the
    most mean equal-power capacity until ``n_selected`` antennas are on.

    Parameters
    ----------
    n_selected : int
        Number of antennas to switch on.
    rho : float
        Per-user linear SNR.
    control : PowerControl or str
        Power control rule used while scoring candidate sets.
    subcarriers : array-like of int, optional
        Subcarrier indices scored during selection; None means the full grid.

    Attributes
    ----------
    support_ : ndarray of bool, shape (n_antennas,)
    selection_order_ : ndarray of int
        Antennas in the order they were added.
    n_selected_ : int
    """

    def __init__(self, n_selected: int = 8, *, rho: float = DEFAULT_RHO,
                 control: PowerControl | str = PowerControl.SNR_GAIN, subcarriers=None):
        self.n_selected = n_selected
        self.rho = rho
        self.control = control
        self.subcarriers = subcarriers

    def fit(self, X, y=None):
        entries = as_entries(X)
        order = greedy_forward_path(
            entries, self.rho, self.control, self.subcarriers, n_target=self.n_selected
        )
        support = np.zeros(entries.shape[1], dtype=bool)
        support[order] = True
        self.support_ = support
        self.selection_order_ = order
        self.n_selected_ = int(order.size)
        return self


class GreedyBackwardSelector(BaseAntennaSelector):
    """Greedy remove-one-at-a-time antenna selection.

    Starts from the full set and repeatedly removes the least-contributing
    antenna until ``n_selected`` remain.

    Attributes
    ----------
    support_ : ndarray of bool, shape (n_antennas,)
    removal_order_ : ndarray of int
        Antennas in the order they were removed.
    n_selected_ : int
    """

    def __init__(self, n_selected: int = 8, *, rho: float = DEFAULT_RHO,
                 control: PowerControl | str = PowerControl.SNR_GAIN, subcarriers=None):
        self.n_selected = n_selected
        self.rho = rho
        self.control = control
        self.subcarriers = subcarriers

    def fit(self, X, y=None):
        entries = as_entries(X)
        n_tx = entries.shape[1]
        check_count(self.n_selected, name="n_selected", minimum=1, maximum=n_tx)
        removals = greedy_backward_path(entries, self.rho, self.control, self.subcarriers)
        support = np.ones(n_tx, dtype=bool)
        support[removals[: n_tx - self.n_selected]] = False
        self.support_ = support
        self.removal_order_ = removals[: n_tx - self.n_selected]
        self.n_selected_ = int(support.sum())
        return self


class RandomSelector(BaseAntennaSelector):
    """Uniform random antenna selection, deterministic per ``random_state``."""

    def __init__(self, n_selected: int = 8, *, random_state: int = 0):
        self.n_selected = n_selected
        self.random_state = random_state

    def fit(self, X, y=None):
        entries = as_entries(X, check_finite=False)
        self.support_ = random_select(self.n_selected, entries.shape[1], self.random_state)
        self.n_selected_ = int(self.support_.sum())
        return self


class LocalSelector(BaseAntennaSelector):
    """Self-organising selection from neighbourhood-local capacity checks.

    Antennas propose to join or leave based only on their k nearest
    neighbours' current state, update synchronously with occasional random
    proposal inversions, and the best globally scoring flag state over the
    run is committed. The number of selected antennas is emergent, not a
    parameter: large neighbourhoods settle on few antennas, small ones on
    many.

    Parameters
    ----------
    n_neighbors : int
        Neighbourhood size k.
    rho : float
        Per-user linear SNR.
    scoring_control : PowerControl or str
        Power control rule for the global per-iteration score (the
        neighbourhood-local comparisons always use POWER_SAVING).
    mutation_prob : float, optional
        Per-antenna proposal inversion probability; None means 1/n_antennas.
    n_iterations : int
        Iterations before committing.
    n_init : int, optional
        Initially-on flag count; None means half the antennas.
    subcarrier_policy : SubcarrierPolicy, optional
        Which subcarriers the local comparisons score; None means all.
    random_state : int
        Seed for the initial flags, subcarrier draws and mutations.

    Attributes
    ----------
    support_ : ndarray of bool, shape (n_antennas,)
    n_selected_ : int
    trace_ : LocalRunTrace
        Full per-iteration history of the fitted run.
    """

    def __init__(self, n_neighbors: int = 16, *, rho: float = DEFAULT_RHO,
                 scoring_control: PowerControl | str = PowerControl.SNR_GAIN,
                 mutation_prob: float | None = None, n_iterations: int = 30,
                 n_init: int | None = None, subcarrier_policy: SubcarrierPolicy | None = None,
                 random_state: int = 0):
        self.n_neighbors = n_neighbors
        self.rho = rho
        self.scoring_control = scoring_control
        self.mutation_prob = mutation_prob
        self.n_iterations = n_iterations
        self.n_init = n_init
        self.subcarrier_policy = subcarrier_policy
        self.random_state = random_state

    def fit(self, X, y=None, *, tx_positions=None, neighborhoods: NeighborhoodTable | None = None):
        """Run the selection on X.

        Exactly one of ``tx_positions`` (antenna coordinates, from which the
        neighbourhood table is built) or ``neighborhoods`` (a prebuilt table)
        must be provided.
        """
        entries = as_entries(X)
        if (tx_positions is None) == (neighborhoods is None):
            raise ValueError("provide exactly one of tx_positions or neighborhoods")
        table = neighborhoods if neighborhoods is not None else build_neighborhoods(
            tx_positions, self.n_neighbors
        )
        policy = self.subcarrier_policy if self.subcarrier_policy is not None else SubcarrierPolicy.full()
        params = LocalParams(
            n_neighbors=self.n_neighbors,
            mutation_prob=self.mutation_prob,
            n_iterations=self.n_iterations,
            n_init=self.n_init,
            subcarriers=policy,
            seed=self.random_state,
        )
        trace = local_select(entries, table, params, self.rho, self.scoring_control)
        self.support_ = trace.committed_mask.copy()
        self.n_selected_ = int(trace.committed_mask.sum())
        self.trace_ = trace
        self.neighborhoods_ = table
        return self
