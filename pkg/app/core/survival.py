"""
Survival-distribution primitives for deintensify.
Scenario laws, transformations, sampling, Kaplan-Meier estimation,
RMST functionals and bootstrap variance. Pure functions; every random
draw comes from an explicit numpy Generator.
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from lifelines import KaplanMeierFitter
from lifelines.utils import restricted_mean_survival_time
from scipy import integrate, optimize

TRANSFORM_KINDS = ("ph", "aft", "po")
TAIL_RULES = ("exponential", "flat")

# Tolerance (months) for every RMST root solve
RMST_TOLERANCE = 1e-6


class TargetUnreachableError(ValueError):
    """A transform family cannot reach the requested RMST."""


class EmptySampleError(ValueError):
    """Kaplan-Meier estimation on an empty sample."""


class DegenerateSampleError(ValueError):
    """Bootstrap variance requested for a sample without events."""


# ---------------------------------------------------------------------------
# Observations and transforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CensoredObservation:
    """One right-censored time in months; event=False means censored."""
    time: float
    event: bool

    def __post_init__(self):
        if not self.time >= 0:
            raise ValueError(f"observation time must be >= 0, got {self.time}")


@dataclass(frozen=True)
class TransformKind:
    """A one-parameter transformation of a survival function.

    ph:  S'(t) = S(t) ** parameter      (hazard ratio)
    aft: S'(t) = S(t / parameter)        (time scale)
    po:  odds(S') = parameter * odds(S)  (odds ratio)
    """
    kind: str
    parameter: float

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform kind '{self.kind}'")
        if not self.parameter > 0:
            raise ValueError(f"transform parameter must be > 0, got {self.parameter}")

    @property
    def is_identity(self) -> bool:
        return self.parameter == 1.0


Sample = Union[Sequence[CensoredObservation], Tuple[np.ndarray, np.ndarray]]


def as_arrays(sample: Sample) -> Tuple[np.ndarray, np.ndarray]:
    """Normalize a sample into (times, events) float/bool arrays."""
    if isinstance(sample, tuple) and len(sample) == 2 and isinstance(sample[0], np.ndarray):
        times = np.asarray(sample[0], dtype=float)
        events = np.asarray(sample[1], dtype=bool)
    else:
        times = np.array([obs.time for obs in sample], dtype=float)
        events = np.array([obs.event for obs in sample], dtype=bool)
    if times.shape != events.shape:
        raise ValueError("times and events must have the same length")
    if np.any(times < 0):
        raise ValueError("observation times must be >= 0")
    return times, events


# ---------------------------------------------------------------------------
# Scenario distributions
# ---------------------------------------------------------------------------


class ScenarioDistribution:
    """A samplable survival law with an RMST functional (times in months)."""

    kind = "abstract"

    def survival(self, t) -> np.ndarray:
        raise NotImplementedError

    def inverse_survival(self, u) -> np.ndarray:
        """Smallest t with S(t) <= u (np.inf when the law never gets that low)."""
        raise NotImplementedError

    def breakpoints(self) -> List[float]:
        """Discontinuities of S, used to split numerical integration."""
        return []

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        # 1 - U lies in (0, 1], so a draw never maps to S = 0 exactly
        u = 1.0 - rng.random(size)
        return self.inverse_survival(u)

    def rmst(self, horizon: float) -> float:
        """Integral of S over [0, horizon]."""
        if not horizon > 0:
            raise ValueError("RMST horizon must be > 0")
        points = [p for p in self.breakpoints() if 0 < p < horizon]
        value, _ = integrate.quad(
            lambda t: float(self.survival(t)),
            0.0,
            horizon,
            points=points or None,
            limit=max(100, 4 * len(points)),
            epsabs=1e-11,
            epsrel=1e-11,
        )
        return float(value)


@dataclass(frozen=True)
class ExponentialDistribution(ScenarioDistribution):
    rate: float
    kind = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"exponential rate must be > 0, got {self.rate}")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def survival(self, t):
        return np.exp(-self.rate * np.asarray(t, dtype=float))

    def inverse_survival(self, u):
        return -np.log(np.asarray(u, dtype=float)) / self.rate

    def rmst(self, horizon: float) -> float:
        if not horizon > 0:
            raise ValueError("RMST horizon must be > 0")
        return float(-math.expm1(-self.rate * horizon) / self.rate)


@dataclass(frozen=True)
class NoEventDistribution(ScenarioDistribution):
    """Survival identically 1: the event never happens (no-AE toxicity law)."""
    kind = "no-event"

    def survival(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def inverse_survival(self, u):
        return np.full_like(np.asarray(u, dtype=float), np.inf)

    def rmst(self, horizon: float) -> float:
        if not horizon > 0:
            raise ValueError("RMST horizon must be > 0")
        return float(horizon)


@dataclass(frozen=True)
class PiecewiseDistribution(ScenarioDistribution):
    """Right-continuous step survival through knots (t_m, S(t_m)).

    Beyond the last knot the curve continues either flat or with an
    exponential tail at the average hazard of the final segment.
    """
    times: Tuple[float, ...]
    values: Tuple[float, ...]
    tail: str = "exponential"
    kind = "piecewise"

    def __post_init__(self):
        validate_knots(self.times, self.values)
        if self.tail not in TAIL_RULES:
            raise ValueError(f"unknown tail rule '{self.tail}'")

    @classmethod
    def from_knots(cls, knots: Sequence[Sequence[float]], tail: str = "exponential"):
        times = tuple(float(k[0]) for k in knots)
        values = tuple(float(k[1]) for k in knots)
        return cls(times=times, values=values, tail=tail)

    @property
    def tail_rate(self) -> float:
        if self.tail == "flat":
            return 0.0
        last = self.values[-1]
        if last <= 0.0 or last >= 1.0:
            return 0.0
        prev = self.values[-2]
        span = self.times[-1] - self.times[-2]
        rate = math.log(prev / last) / span
        if rate > 0:
            return rate
        # flat final segment: fall back to the curve's average hazard
        return -math.log(last) / self.times[-1]

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        knots = np.asarray(self.times)
        vals = np.asarray(self.values)
        idx = np.searchsorted(knots, t, side="right") - 1
        out = vals[np.clip(idx, 0, len(vals) - 1)]
        beyond = t > knots[-1]
        rate = self.tail_rate
        if rate > 0:
            out = np.where(beyond, vals[-1] * np.exp(-rate * (t - knots[-1])), out)
        return out

    def inverse_survival(self, u):
        u = np.asarray(u, dtype=float)
        knots = np.asarray(self.times)
        vals = np.asarray(self.values)
        # values are non-increasing, so reverse to search the first knot with S <= u
        first = len(vals) - np.searchsorted(vals[::-1], u, side="right")
        inside = first < len(vals)
        out = knots[np.clip(first, 0, len(knots) - 1)]
        rate = self.tail_rate
        last = vals[-1]
        with np.errstate(divide="ignore"):
            if rate > 0:
                tail_time = knots[-1] + np.log(last / np.maximum(u, 1e-300)) / rate
            else:
                tail_time = np.full_like(u, np.inf)
        return np.where(inside, out, tail_time)

    def breakpoints(self) -> List[float]:
        return list(self.times[1:])

    def rmst(self, horizon: float) -> float:
        if not horizon > 0:
            raise ValueError("RMST horizon must be > 0")
        area = 0.0
        for j, start in enumerate(self.times):
            if start >= horizon:
                break
            end = self.times[j + 1] if j + 1 < len(self.times) else horizon
            area += self.values[j] * (min(end, horizon) - start)
        last_t = self.times[-1]
        if horizon > last_t:
            rate = self.tail_rate
            if rate > 0:
                # the loop credited the flat extension; swap it for the tail
                width = horizon - last_t
                area -= self.values[-1] * width
                area += self.values[-1] * -math.expm1(-rate * width) / rate
        return float(area)


@dataclass(frozen=True)
class TransformedDistribution(ScenarioDistribution):
    base: ScenarioDistribution
    transform: TransformKind
    kind = "transformed"

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        p = self.transform.parameter
        if self.transform.kind == "aft":
            return self.base.survival(t / p)
        s = self.base.survival(t)
        if self.transform.kind == "ph":
            return s ** p
        return p * s / (1.0 - s + p * s)

    def inverse_survival(self, u):
        u = np.asarray(u, dtype=float)
        p = self.transform.parameter
        if self.transform.kind == "aft":
            return p * self.base.inverse_survival(u)
        if self.transform.kind == "ph":
            return self.base.inverse_survival(u ** (1.0 / p))
        return self.base.inverse_survival(u / (u + p * (1.0 - u)))

    def breakpoints(self) -> List[float]:
        scale = self.transform.parameter if self.transform.kind == "aft" else 1.0
        return [scale * b for b in self.base.breakpoints()]


def validate_knots(times: Sequence[float], values: Sequence[float]) -> None:
    """Check the piecewise-curve invariants; raise ValueError naming the knot."""
    if len(times) != len(values):
        raise ValueError("knot times and survival values differ in length")
    if len(times) < 2:
        raise ValueError("a piecewise curve needs at least two knots")
    if times[0] != 0.0 or values[0] != 1.0:
        raise ValueError("first knot must be (0, 1)")
    for i in range(1, len(times)):
        if not times[i] > times[i - 1]:
            raise ValueError(f"knot {i}: times must be strictly increasing")
        if not 0.0 <= values[i] <= 1.0:
            raise ValueError(f"knot {i}: survival must lie in [0, 1]")
        if values[i] > values[i - 1]:
            raise ValueError(f"knot {i}: survival must be non-increasing")


# ---------------------------------------------------------------------------
# Sampling, RMST and transforms
# ---------------------------------------------------------------------------


def sample_event_time(dist: ScenarioDistribution, rng: np.random.Generator) -> float:
    """Draw one event time (months) by inverse-CDF sampling."""
    return float(dist.sample(rng))


def rmst(dist: ScenarioDistribution, horizon: float) -> float:
    """Restricted mean survival time up to horizon."""
    return dist.rmst(horizon)


def exponential_with_rmst(target: float, horizon: float) -> ExponentialDistribution:
    """Exponential law whose RMST at horizon equals target."""
    if not 0 < target < horizon:
        raise TargetUnreachableError(
            f"an exponential RMST must lie in (0, {horizon}), got {target}"
        )

    def gap(log_rate: float) -> float:
        return ExponentialDistribution(math.exp(log_rate)).rmst(horizon) - target

    log_rate = optimize.brentq(gap, math.log(1e-12), math.log(1e6), xtol=1e-14, rtol=1e-15)
    return ExponentialDistribution(math.exp(log_rate))


def apply_transform(base: ScenarioDistribution, tk: TransformKind) -> ScenarioDistribution:
    """Transform a survival law; closed families stay closed."""
    if tk.is_identity or isinstance(base, NoEventDistribution):
        return base
    if isinstance(base, ExponentialDistribution):
        if tk.kind == "ph":
            return ExponentialDistribution(base.rate * tk.parameter)
        if tk.kind == "aft":
            return ExponentialDistribution(base.rate / tk.parameter)
    return TransformedDistribution(base=base, transform=tk)


def solve_transform_to_rmst(
    base: ScenarioDistribution, kind: str, target: float, horizon: float
) -> TransformKind:
    """Find the transform parameter in `kind` that gives RMST == target."""
    if kind not in TRANSFORM_KINDS:
        raise ValueError(f"unknown transform kind '{kind}'")
    base_value = base.rmst(horizon)
    if abs(base_value - target) <= RMST_TOLERANCE / 10:
        return TransformKind(kind, 1.0)

    def gap(log_param: float) -> float:
        dist = apply_transform(base, TransformKind(kind, math.exp(log_param)))
        return dist.rmst(horizon) - target

    lo, hi = -25.0, 25.0
    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo * g_hi > 0:
        raise TargetUnreachableError(
            f"{kind} transforms of the base law cannot reach RMST {target:.6g} at "
            f"horizon {horizon:g} (base RMST {base_value:.6g})"
        )
    log_param = optimize.brentq(gap, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    result = TransformKind(kind, math.exp(log_param))
    if abs(gap(log_param)) > RMST_TOLERANCE:
        raise TargetUnreachableError(
            f"{kind} transform solve stalled {abs(gap(log_param)):.3g} months from target"
        )
    return result


# ---------------------------------------------------------------------------
# Kaplan-Meier
# ---------------------------------------------------------------------------


@dataclass
class KaplanMeierFit:
    """Product-limit estimate at the distinct event times."""
    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    model: KaplanMeierFitter

    def survival_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right") - 1
        padded = np.concatenate([[1.0], self.survival])
        return padded[idx + 1]


def kaplan_meier(sample: Sample) -> KaplanMeierFit:
    """Kaplan-Meier fit; censorings tied with events count as at risk."""
    times, events = as_arrays(sample)
    if times.size == 0:
        raise EmptySampleError("Kaplan-Meier needs at least one observation")
    kmf = KaplanMeierFitter()
    kmf.fit(durations=times, event_observed=events)
    table = kmf.event_table
    table = table[table["observed"] > 0]
    event_times = table.index.values.astype(float)
    return KaplanMeierFit(
        times=event_times,
        survival=kmf.survival_function_.iloc[:, 0].loc[event_times].values.astype(float),
        at_risk=table["at_risk"].values,
        events=table["observed"].values,
        model=kmf,
    )


def km_rmst(fit: KaplanMeierFit, horizon: float) -> float:
    """Area under the KM step function on [0, horizon], flat past the last time."""
    if not horizon > 0:
        raise ValueError("RMST horizon must be > 0")
    return float(restricted_mean_survival_time(fit.model, t=horizon))


def _weighted_km_rmst(
    times: np.ndarray, events: np.ndarray, weights: np.ndarray, horizon: float
) -> np.ndarray:
    """KM RMST for every row of a (B, n) weight matrix over sorted observations."""
    n_total = weights.sum(axis=1, keepdims=True)
    unique, starts = np.unique(times, return_index=True)
    ends = np.append(starts[1:], times.size) - 1

    cum_all = np.cumsum(weights, axis=1)
    cum_evt = np.cumsum(weights * events, axis=1)
    removed_before = np.where(starts > 0, cum_all[:, np.maximum(starts - 1, 0)], 0.0)
    deaths = cum_evt[:, ends] - np.where(starts > 0, cum_evt[:, np.maximum(starts - 1, 0)], 0.0)
    at_risk = n_total - removed_before

    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(at_risk > 0, 1.0 - deaths / at_risk, 1.0)
    survival = np.cumprod(factor, axis=1)

    edges = np.minimum(np.concatenate([[0.0], unique, [horizon]]), horizon)
    heights = np.concatenate([np.ones((weights.shape[0], 1)), survival], axis=1)
    return heights @ np.diff(edges)


def bootstrap_rmst_se(
    sample: Sample,
    horizon: float,
    n_boot: int = 500,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Standard deviation of the KM RMST over nonparametric resamples."""
    times, events = as_arrays(sample)
    if times.size < 2:
        raise ValueError("bootstrap needs at least two observations")
    if n_boot < 2:
        raise ValueError("bootstrap needs at least two resamples")
    if not events.any():
        raise DegenerateSampleError("bootstrap RMST variance needs at least one event")
    if rng is None:
        rng = np.random.default_rng()

    order = np.argsort(times, kind="stable")
    times, events = times[order], events[order].astype(float)
    n = times.size
    weights = rng.multinomial(n, np.full(n, 1.0 / n), size=n_boot).astype(float)
    values = _weighted_km_rmst(times, events, weights, horizon)
    return float(np.std(values, ddof=1))
