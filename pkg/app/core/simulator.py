"""
Operating characteristics by replicate-parallel Monte Carlo.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .calibration import MIN_SIMULATIONS, apply_calibration, calibrate_design
from .comparators import RciDecider
from .engine import BayesianDecider, run_trial
from .models import (
    INFERIOR_STOP,
    NEVER_TESTED,
    NON_INFERIOR,
    NOT_REJECTED,
    TOXICITY_STOP,
    VERDICTS,
    DesignConfig,
    MissingCalibrationError,
    Scenario,
    TrialRecord,
)
from .streams import parallel_map, replicate_seed
from .survival import RMST_TOLERANCE

logger = logging.getLogger(__name__)

BAYESIAN = "bayesian"
COMPARATOR = "comparator"
DESIGN_KINDS = (BAYESIAN, COMPARATOR)


@dataclass
class ScenarioSet:
    """Labelled scenarios; annotations (theta_k, beta_k) are computed at the horizon."""
    scenarios: List[Scenario]
    horizon: float
    annotations: List[List[Tuple[float, float]]] = field(init=False)

    def __post_init__(self):
        labels = [s.label for s in self.scenarios]
        if len(set(labels)) != len(labels):
            raise ValueError("scenario labels must be unique")
        self.annotations = [
            [arm.summaries(self.horizon) for arm in s.arms] for s in self.scenarios
        ]

    def __len__(self) -> int:
        return len(self.scenarios)

    def check_declared(self, index: int, arm: int, theta=None, beta=None) -> None:
        """Raise when a declared summary disagrees with the computed one."""
        actual_theta, actual_beta = self.annotations[index][arm - 1]
        label = self.scenarios[index].label
        if theta is not None and abs(theta - actual_theta) > RMST_TOLERANCE:
            raise ValueError(
                f"{label} arm {arm}: declared theta {theta} but RMST is {actual_theta:.9g}"
            )
        if beta is not None and abs(beta - actual_beta) > RMST_TOLERANCE:
            raise ValueError(
                f"{label} arm {arm}: declared beta {beta} but RMST is {actual_beta:.9g}"
            )


@dataclass
class Estimate:
    estimate: float
    mc_se: float


def proportion(hits: int, n: int) -> Estimate:
    p = hits / n
    return Estimate(p, math.sqrt(p * (1.0 - p) / n))


def mean_estimate(values: Sequence[float]) -> Estimate:
    values = np.asarray(values, dtype=float)
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return Estimate(float(values.mean()), sd / math.sqrt(values.size))


@dataclass
class ArmCharacteristics:
    arm: int
    theta: float
    beta: float
    power: Estimate
    futility: Estimate
    toxicity: Estimate
    not_tested: Estimate
    not_rejected: Estimate
    enrollment: Estimate


@dataclass
class OperatingCharacteristics:
    label: str
    n_sims: int
    seed: int
    arms: List[ArmCharacteristics]
    duration: Estimate
    total_enrollment: Estimate
    type_one_error: Optional[Estimate] = None
    futility_curve: List[Tuple[float, float]] = field(default_factory=list)

    def arm(self, k: int) -> ArmCharacteristics:
        return self.arms[k - 1]


def null_arms(config: DesignConfig, annotations: Sequence[Tuple[float, float]]) -> List[int]:
    """Arms whose true summaries satisfy the null hypothesis."""
    nulls = []
    for k, (theta, beta) in enumerate(annotations, start=1):
        inferior = theta <= config.ni_threshold + RMST_TOLERANCE
        no_gain = config.co_primary and beta <= config.beta0 + RMST_TOLERANCE
        if inferior or no_gain:
            nulls.append(k)
    return nulls


def summarize(
    config: DesignConfig,
    label: str,
    annotations: Sequence[Tuple[float, float]],
    records: Sequence[TrialRecord],
    seed: int,
) -> OperatingCharacteristics:
    """Aggregate replicate records; verdict probabilities are counted, so they partition."""
    n = len(records)
    arms = []
    for k in range(1, config.n_arms + 1):
        counts = {v: 0 for v in VERDICTS}
        for r in records:
            counts[r.verdicts[k - 1]] += 1
        theta, beta = annotations[k - 1]
        arms.append(
            ArmCharacteristics(
                arm=k,
                theta=theta,
                beta=beta,
                power=proportion(counts[NON_INFERIOR], n),
                futility=proportion(counts[INFERIOR_STOP], n),
                toxicity=proportion(counts[TOXICITY_STOP], n),
                not_tested=proportion(counts[NEVER_TESTED], n),
                not_rejected=proportion(counts[NOT_REJECTED], n),
                enrollment=mean_estimate([r.enrollments[k - 1] for r in records]),
            )
        )

    nulls = null_arms(config, annotations)
    type_one = None
    if nulls:
        hits = sum(1 for r in records if any(r.verdicts[k - 1] == NON_INFERIOR for k in nulls))
        type_one = proportion(hits, n)

    return OperatingCharacteristics(
        label=label,
        n_sims=n,
        seed=seed,
        arms=arms,
        duration=mean_estimate([r.duration for r in records]),
        total_enrollment=mean_estimate([r.total_enrollment for r in records]),
        type_one_error=type_one,
        futility_curve=futility_curve(records, config.interim_period),
    )


def futility_curve(
    records: Sequence[TrialRecord], period: float = 1.0
) -> List[Tuple[float, float]]:
    """P(arm 1 stopped for inferiority or toxicity by month t) on the interim grid."""
    stops = [
        r.decision_times[0]
        for r in records
        if r.verdicts[0] in (INFERIOR_STOP, TOXICITY_STOP)
    ]
    horizon = max((r.duration for r in records), default=0.0)
    n_steps = int(math.ceil(horizon / period - 1e-9))
    stops = np.sort(np.asarray(stops, dtype=float))
    curve = []
    for j in range(1, n_steps + 1):
        t = j * period
        curve.append((t, int(np.searchsorted(stops, t + 1e-9, side="right")) / len(records)))
    return curve


# ---------------------------------------------------------------------------
# Replicates
# ---------------------------------------------------------------------------


def _replicate(config: DesignConfig, scenario: Scenario, kind: str, seed) -> TrialRecord:
    decider = RciDecider(config) if kind == COMPARATOR else BayesianDecider(config)
    record = run_trial(config, scenario, seed, decider, keep_patients=False)
    # only verdicts, times and counts travel back to the parent process
    record.interims = []
    return record


def require_calibrated(config: DesignConfig, kind: str) -> None:
    if kind == COMPARATOR:
        if config.comparator is None:
            raise ValueError("comparator simulation needs a 'comparator' section in the design")
        return
    missing = [
        name
        for name in ("b_ni", "b_inf", "b_tox")
        if not getattr(config, name).calibrated
    ]
    if missing:
        raise MissingCalibrationError(f"uncalibrated boundaries: {', '.join(missing)}")


def simulate_oc(
    config: DesignConfig,
    scenarios: ScenarioSet,
    n_sims: int,
    seed: int,
    workers: Optional[int] = None,
    kind: str = BAYESIAN,
) -> List[OperatingCharacteristics]:
    """C replicates per scenario on streams (seed, scenario index, replicate index)."""
    if kind not in DESIGN_KINDS:
        raise ValueError(f"design kind must be one of {DESIGN_KINDS}")
    if n_sims < MIN_SIMULATIONS:
        raise ValueError(f"simulation needs at least {MIN_SIMULATIONS} replicates, got {n_sims}")
    require_calibrated(config, kind)

    reports = []
    for i, scenario in enumerate(scenarios.scenarios):
        logger.info("Simulating '%s': %d replicates (%s)", scenario.label, n_sims, kind)
        worker = partial(_replicate, config, scenario, kind)
        seeds = [replicate_seed(seed, i, c) for c in range(n_sims)]
        records = parallel_map(worker, seeds, workers)
        reports.append(summarize(config, scenario.label, scenarios.annotations[i], records, seed))
    return reports


# ---------------------------------------------------------------------------
# Sample-size search
# ---------------------------------------------------------------------------


@dataclass
class PowerPoint:
    m_max: int
    power: float
    mc_se: float
    s_ni: float


@dataclass
class SampleSizeResult:
    target: float
    curve: List[PowerPoint]
    recommended: Optional[int]

    @property
    def reached(self) -> bool:
        return self.recommended is not None


def sample_size_search(
    template: DesignConfig,
    scenario: Scenario,
    target_power: float,
    grid: Sequence[int],
    n_sims: int,
    seed: int,
    workers: Optional[int] = None,
) -> SampleSizeResult:
    """Smallest m_max on the grid whose arm-1 power reaches the target.

    Every grid point is recalibrated, since the boundaries depend on m_max.
    """
    grid = list(grid)
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("m_max grid must be non-empty and strictly ascending")
    if not 0 <= target_power <= 1:
        raise ValueError("target power must lie in [0, 1]")

    single = ScenarioSet([scenario], template.horizon)
    curve: List[PowerPoint] = []
    recommended = None
    for m_max in grid:
        config = template.with_max_per_arm(m_max)
        calibration = calibrate_design(config, n_sims, seed, workers, check=False)
        config = apply_calibration(config, calibration)
        oc = simulate_oc(config, single, n_sims, seed, workers)[0]
        point = PowerPoint(m_max, oc.arm(1).power.estimate, oc.arm(1).power.mc_se, calibration.s_ni)
        curve.append(point)
        logger.info("m_max=%d: power %.4f (s_NI=%.6g)", m_max, point.power, point.s_ni)
        if recommended is None and point.power >= target_power:
            recommended = m_max
    if recommended is None:
        logger.warning("Target power %.3g not reached on the grid", target_power)
    return SampleSizeResult(target_power, curve, recommended)
