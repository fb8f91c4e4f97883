"""
Frequentist comparator designs: repeated confidence intervals for the
Kaplan-Meier RMST with alpha spending, plus the interim futility rules

    F1  stop if the one-sided p-value for theta >= theta0 is <= 0.0025
    F2  stop if that p-value is <= 0.05
    F3  stop if the upper repeated bound (O'Brien-Fleming, total 0.025) is below theta0

The comparators share the engine's accrual, censoring and pause logic;
only the interim decision differs.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .engine import run_trial
from .models import (
    CONTINUE,
    DECLARE_NI,
    STOP_INFERIOR,
    DesignConfig,
    InterimLook,
    RciDesignConfig,
    Scenario,
    SpendingFunction,
    TrialRecord,
    TrialState,
)
from .rules import pause_or_continue
from .streams import SeedLike
from .survival import Sample, as_arrays, bootstrap_rmst_se, kaplan_meier, km_rmst

STOP_FUTILITY = "stop-futility"

FUTILITY_P_THRESHOLDS = {"F1": 0.0025, "F2": 0.05}

# Increments at or below this are treated as no spend at all
ZERO_SPEND = 1e-15


# ---------------------------------------------------------------------------
# Alpha spending
# ---------------------------------------------------------------------------


def cumulative_spend(sf: SpendingFunction, s: float) -> float:
    """alpha(s): one-sided type I error spent by information fraction s."""
    if not 0 < s <= 1:
        raise ValueError(f"information fraction must lie in (0, 1], got {s}")
    if sf.kind == "obrien-fleming":
        z = norm.isf(sf.alpha / 2.0)
        return float(2.0 * norm.sf(z / math.sqrt(s)))
    if sf.kind == "pocock":
        return sf.alpha * math.log1p((math.e - 1.0) * s)
    if sf.kind == "linear":
        return sf.alpha * s
    raise ValueError(f"unknown spending function '{sf.kind}'")


def spend_increment(sf: SpendingFunction, s_prev: float, s_now: float) -> float:
    """alpha_t = alpha(s_t) - alpha(s_{t-1}), with alpha(0) = 0."""
    if s_now <= s_prev:
        return 0.0
    spent = cumulative_spend(sf, s_prev) if s_prev > 0 else 0.0
    return max(cumulative_spend(sf, s_now) - spent, 0.0)


# ---------------------------------------------------------------------------
# Interim test
# ---------------------------------------------------------------------------


@dataclass
class RciResult:
    decision: str = CONTINUE
    estimate: Optional[float] = None
    std_error: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    p_value: Optional[float] = None
    degenerate: bool = False


def rci_lower_bound(estimate: float, std_error: float, alpha_t: float) -> float:
    return estimate - norm.isf(alpha_t) * std_error


def rci_interim(
    sample: Sample,
    config: DesignConfig,
    alpha_t: float,
    futility_alpha_t: float,
    rng: np.random.Generator,
) -> RciResult:
    """One repeated-confidence-interval look at an arm; futility is checked before NI."""
    cfg = config.comparator or RciDesignConfig()
    times, events = as_arrays(sample)
    if times.size < cfg.min_enrollment or not events.any():
        return RciResult()

    estimate = km_rmst(kaplan_meier((times, events)), config.horizon)
    se = bootstrap_rmst_se((times, events), config.horizon, cfg.bootstrap, rng)
    result = RciResult(estimate=estimate, std_error=se)
    if se == 0.0:
        result.degenerate = True
        return result

    result.p_value = float(norm.cdf((estimate - config.theta0) / se))
    if cfg.futility in FUTILITY_P_THRESHOLDS:
        if result.p_value <= FUTILITY_P_THRESHOLDS[cfg.futility]:
            result.decision = STOP_FUTILITY
            return result
    elif cfg.futility == "F3" and futility_alpha_t > ZERO_SPEND:
        result.upper = estimate + norm.isf(futility_alpha_t) * se
        if result.upper < config.theta0:
            result.decision = STOP_FUTILITY
            return result

    if alpha_t > ZERO_SPEND:
        result.lower = rci_lower_bound(estimate, se, alpha_t)
        if result.lower > config.theta0 - config.delta:
            result.decision = DECLARE_NI
    return result


class RciDecider:
    """Engine decider for the comparator designs.

    Information fraction is n_{t,k}/m_max; the fraction at the previous
    look is read back from enrollment times, so the decider keeps no state.
    """

    def __init__(self, config: DesignConfig):
        self.config = config
        self.rci = config.comparator or RciDesignConfig()

    def _fractions(self, state: TrialState, arm: int):
        m_max = self.config.max_per_arm
        n_now = state.enrollments[arm - 1]
        cutoff = state.clock - self.config.interim_period
        n_prev = sum(1 for p in state.patients if p.arm == arm and p.enroll_time <= cutoff)
        s_prev = n_prev / m_max if n_prev >= self.rci.min_enrollment else 0.0
        return s_prev, n_now / m_max

    def __call__(self, state: TrialState, rng: np.random.Generator) -> InterimLook:
        arm = state.active_arm
        s_prev, s_now = self._fractions(state, arm)
        alpha_t = spend_increment(self.rci.ni_spending, s_prev, s_now)
        futility_alpha_t = spend_increment(self.rci.futility_spending, s_prev, s_now)
        result = rci_interim(
            state.arm_view(arm, state.clock), self.config, alpha_t, futility_alpha_t, rng
        )

        if result.decision == STOP_FUTILITY:
            decision = STOP_INFERIOR
        elif result.decision == DECLARE_NI:
            decision = DECLARE_NI
        else:
            decision = pause_or_continue(self.config, state)

        return InterimLook(
            clock=state.clock,
            arm=arm,
            n_arm=state.enrollments[arm - 1],
            decision=decision,
            estimate=result.estimate,
            std_error=result.std_error,
            lower=result.lower,
            upper=result.upper,
            p_value=result.p_value,
            degenerate=result.degenerate,
        )


def run_comparator_trial(
    config: DesignConfig, scenario: Scenario, seed: SeedLike, keep_patients: bool = True
) -> TrialRecord:
    """One comparator trial on the engine's accrual and censoring machinery."""
    return run_trial(config, scenario, seed, RciDecider(config), keep_patients)
