"""
Beta-Stacy survival model on a fixed time grid.

The continuous-time process is realized through independent discrete
hazards h_m ~ Beta(a_m, b_m) per grid bin (t_{m-1}, t_m], with

    a_m = c(t_m) * (V0(t_m) - V0(t_{m-1})) + d_m
    b_m = c(t_m) * (1 - V0(t_m)) + r_m

where d_m counts events in the bin and r_m counts observations still
under observation after it. Right-censored updates only add counts.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .survival import Sample, ScenarioDistribution, as_arrays

logger = logging.getLogger(__name__)

NON_INCREASING = "non-increasing"
NON_DECREASING = "non-decreasing"
DIRECTIONS = (NON_INCREASING, NON_DECREASING)

# Beta parameters never drop below this, so vanishing prior increments stay finite
MIN_BETA_PARAMETER = 1e-10


class AcceptanceRateError(ValueError):
    """Order-constrained rejection sampling ran out of proposals."""


def make_grid(step: float = 0.25, horizon: float = 36.0) -> np.ndarray:
    """0 = t_0 < t_1 < ... < t_M with t_M >= horizon."""
    if not step > 0 or not horizon > 0:
        raise ValueError("grid step and horizon must be > 0")
    n_bins = int(np.ceil(horizon / step - 1e-9))
    return step * np.arange(n_bins + 1, dtype=float)


def _validate_grid(grid: np.ndarray) -> None:
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid needs at least two points")
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")


@dataclass(frozen=True)
class BetaStacyModel:
    """Prior/posterior state: grid, V0, c at grid points and sufficient statistics."""
    grid: np.ndarray
    prior_mean: np.ndarray
    weight: np.ndarray
    events: np.ndarray = field(repr=False)
    censored: np.ndarray = field(repr=False)
    n_obs: int = 0

    @property
    def n_bins(self) -> int:
        return self.grid.size - 1

    @property
    def at_risk_after(self) -> np.ndarray:
        """r_m: observations with time beyond bin m (still followed after it)."""
        return self.n_obs - np.cumsum(self.events + self.censored)

    def beta_parameters(self):
        increments = np.diff(self.prior_mean)
        c = self.weight[1:]
        a = c * increments + self.events
        b = c * (1.0 - self.prior_mean[1:]) + self.at_risk_after
        return np.maximum(a, MIN_BETA_PARAMETER), np.maximum(b, MIN_BETA_PARAMETER)


@dataclass
class PosteriorDrawSet:
    """R survival paths on the grid and their RMSTs at the horizon."""
    grid: np.ndarray
    paths: np.ndarray
    rmst: np.ndarray
    horizon: float

    @property
    def size(self) -> int:
        return int(self.rmst.size)


@dataclass
class JointDrawSet:
    """R accepted joint draws of per-arm RMSTs, shape (R, K)."""
    rmst: np.ndarray
    acceptance_rate: float
    direction: str


def make_prior(
    grid: Sequence[float],
    center: ScenarioDistribution,
    weight: Union[float, Callable[[np.ndarray], np.ndarray]] = 10.0,
) -> BetaStacyModel:
    """Prior with mean V0 = 1 - S_center on the grid and weight c."""
    grid = np.asarray(grid, dtype=float)
    _validate_grid(grid)
    c = weight(grid) if callable(weight) else np.full(grid.size, float(weight))
    c = np.asarray(c, dtype=float)
    if c.shape != grid.shape or np.any(c <= 0):
        raise ValueError("prior weight c must be > 0 at every grid point")
    prior_mean = 1.0 - np.asarray(center.survival(grid), dtype=float)
    prior_mean[0] = 0.0
    prior_mean = np.maximum.accumulate(np.clip(prior_mean, 0.0, 1.0))
    zeros = np.zeros(grid.size - 1, dtype=np.int64)
    return BetaStacyModel(grid, prior_mean, c, zeros, zeros.copy(), 0)


def update(model: BetaStacyModel, sample: Sample) -> BetaStacyModel:
    """Add a right-censored sample's counts; returns a new model.

    Events go to the bin (t_{m-1}, t_m] containing them (time 0 to bin 1).
    A censoring exactly at t_m survives bin m; times past t_M are censored at t_M.
    """
    times, events = as_arrays(sample)
    if times.size == 0:
        return model
    grid = model.grid
    last = grid[-1]
    is_event = events & (times <= last)
    clamped = np.minimum(times, last)

    evt_bin = np.maximum(np.searchsorted(grid, clamped[is_event], side="left"), 1)
    cen_bin = np.maximum(np.searchsorted(grid, clamped[~is_event], side="right"), 1)
    cen_bin = cen_bin[cen_bin <= model.n_bins]

    m = model.n_bins
    d = np.bincount(evt_bin - 1, minlength=m)[:m]
    cens = np.bincount(cen_bin - 1, minlength=m)[:m]
    return replace(
        model,
        events=model.events + d,
        censored=model.censored + cens,
        n_obs=model.n_obs + int(times.size),
    )


def _widths(grid: np.ndarray, horizon: float, n_bins: int) -> np.ndarray:
    return np.diff(np.minimum(grid[: n_bins + 1], horizon))


def sample_paths(
    model: BetaStacyModel, n_draws: int, rng: np.random.Generator, horizon: Optional[float] = None
) -> PosteriorDrawSet:
    """Draw full survival paths S(t_m) = prod_{j<=m} (1 - h_j)."""
    if n_draws < 1:
        raise ValueError("need at least one posterior draw")
    if horizon is None:
        horizon = float(model.grid[-1])
    a, b = model.beta_parameters()
    hazards = rng.beta(a, b, size=(n_draws, a.size))
    surv = np.cumprod(1.0 - hazards, axis=1)
    paths = np.concatenate([np.ones((n_draws, 1)), surv], axis=1)
    rmst = paths[:, :-1] @ _widths(model.grid, horizon, model.n_bins)
    return PosteriorDrawSet(model.grid, paths, rmst, float(horizon))


def rmst_draws(
    model: BetaStacyModel, horizon: float, n_draws: int, rng: np.random.Generator
) -> np.ndarray:
    """Posterior RMST draws sampling only the bins that start before the horizon."""
    n_bins = int(np.searchsorted(model.grid, horizon, side="left"))
    n_bins = min(max(n_bins, 1), model.n_bins)
    a, b = model.beta_parameters()
    hazards = rng.beta(a[:n_bins], b[:n_bins], size=(n_draws, n_bins))
    surv = np.cumprod(1.0 - hazards, axis=1)
    left = np.concatenate([np.ones((n_draws, 1)), surv[:, :-1]], axis=1)
    return left @ _widths(model.grid, horizon, n_bins)


def posterior_prob(
    model: BetaStacyModel,
    horizon: float,
    threshold: float,
    above: bool,
    n_draws: int,
    rng: np.random.Generator,
) -> float:
    """Monte-Carlo P(RMST > threshold) when above, else P(RMST <= threshold)."""
    if n_draws < 100:
        raise ValueError("posterior probabilities need at least 100 draws")
    draws = rmst_draws(model, horizon, n_draws, rng)
    return prob_from_draws(draws, threshold, above)


def prob_from_draws(draws: np.ndarray, threshold: float, above: bool) -> float:
    hits = np.count_nonzero(draws > threshold) if above else np.count_nonzero(draws <= threshold)
    return hits / draws.size


def _ordered(block: np.ndarray, direction: str) -> np.ndarray:
    steps = np.diff(block, axis=1)
    if direction == NON_INCREASING:
        return np.all(steps <= 0, axis=1)
    return np.all(steps >= 0, axis=1)


def joint_monotone_sample(
    models: List[BetaStacyModel],
    horizon: float,
    direction: str,
    n_draws: int,
    rng: np.random.Generator,
    budget: int = 100,
) -> JointDrawSet:
    """Rejection sampling from the product posterior truncated to ordered RMSTs."""
    if len(models) < 2:
        raise ValueError("joint monotone sampling needs at least two models")
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction '{direction}'")

    kept: List[np.ndarray] = []
    accepted = 0
    proposed = 0
    limit = budget * n_draws
    while accepted < n_draws:
        if proposed >= limit:
            raise AcceptanceRateError(
                f"only {accepted} of {n_draws} joint draws accepted after {proposed} proposals"
            )
        block = np.column_stack([rmst_draws(m, horizon, n_draws, rng) for m in models])
        proposed += n_draws
        ok = block[_ordered(block, direction)]
        kept.append(ok)
        accepted += ok.shape[0]

    draws = np.concatenate(kept, axis=0)[:n_draws]
    rate = accepted / proposed
    logger.debug("Joint %s sample: %d proposals, acceptance %.3f", direction, proposed, rate)
    return JointDrawSet(draws, rate, direction)
