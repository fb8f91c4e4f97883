"""
Trial state machine for sequential de-intensification designs.

Patients accrue to one arm at a time; an interim analysis runs at the
end of every interim period on data censored at the clock. A decider
turns the state into an InterimLook; the engine applies the decision:
pause accrual, advance to the next arm, or terminate.
"""
import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .betastacy import (
    NON_DECREASING,
    NON_INCREASING,
    BetaStacyModel,
    joint_monotone_sample,
    make_grid,
    make_prior,
    rmst_draws,
    update,
)
from .models import (
    DECLARE_NI,
    ENROLLING,
    NEVER_TESTED,
    PAUSE,
    PAUSED,
    TERMINATED,
    VERDICT_FOR_DECISION,
    ArmScenario,
    DesignConfig,
    InterimLook,
    PatientRecord,
    PriorSpec,
    Scenario,
    TrialRecord,
    TrialState,
)
from .rules import coprimary_interim_decision, efficacy_interim_decision, monitoring_look
from .streams import SeedLike, interim_rng, trial_streams
from .survival import exponential_with_rmst

logger = logging.getLogger(__name__)

Decider = Callable[[TrialState, np.random.Generator], InterimLook]

DEFAULT_PRIOR_WEIGHT = 10.0


# ---------------------------------------------------------------------------
# Posterior summaries
# ---------------------------------------------------------------------------


def resolve_priors(config: DesignConfig) -> Tuple[PriorSpec, Optional[PriorSpec]]:
    """Configured priors, or exponentials centred on the null RMSTs with c = 10."""
    efficacy = config.efficacy_prior
    if efficacy is None:
        center = exponential_with_rmst(config.ni_threshold, config.horizon)
        efficacy = PriorSpec(center, DEFAULT_PRIOR_WEIGHT)
    toxicity = None
    if config.co_primary:
        toxicity = config.toxicity_prior
        if toxicity is None:
            toxicity = PriorSpec(
                exponential_with_rmst(config.beta0, config.horizon), DEFAULT_PRIOR_WEIGHT
            )
    return efficacy, toxicity


class BayesianDecider:
    """Posterior RMST draws for the active arm, judged by the design's rules."""

    def __init__(self, config: DesignConfig):
        self.config = config
        grid = make_grid(config.grid_step, config.grid_horizon)
        efficacy, toxicity = resolve_priors(config)
        self.efficacy_prior = make_prior(grid, efficacy.center, efficacy.weight)
        self.toxicity_prior = None
        if toxicity is not None:
            self.toxicity_prior = make_prior(grid, toxicity.center, toxicity.weight)

    def _summaries(
        self, state: TrialState, rng: np.random.Generator, toxicity: bool
    ) -> np.ndarray:
        config = self.config
        prior: BetaStacyModel = self.toxicity_prior if toxicity else self.efficacy_prior
        monotone = config.monotone_toxicity if toxicity else config.monotone_efficacy
        k = state.active_arm
        opened = [a for a in range(1, k + 1) if state.enrollments[a - 1] > 0]

        if monotone and len(opened) >= 2:
            models = [update(prior, state.arm_view(a, state.clock, toxicity)) for a in opened]
            # toxicity RMST rises as arms de-intensify, efficacy RMST falls
            direction = NON_DECREASING if toxicity else NON_INCREASING
            joint = joint_monotone_sample(
                models,
                config.horizon,
                direction,
                config.posterior_draws,
                rng,
                budget=config.proposal_budget,
            )
            return joint.rmst[:, opened.index(k)]

        model = update(prior, state.arm_view(k, state.clock, toxicity))
        return rmst_draws(model, config.horizon, config.posterior_draws, rng)

    def draws(self, state: TrialState, rng: np.random.Generator):
        """(thetas, betas) for the active arm; betas is None in efficacy-only mode."""
        thetas = self._summaries(state, rng, toxicity=False)
        betas = self._summaries(state, rng, toxicity=True) if self.config.co_primary else None
        return thetas, betas

    def __call__(self, state: TrialState, rng: np.random.Generator) -> InterimLook:
        thetas, betas = self.draws(state, rng)
        if self.config.co_primary:
            return coprimary_interim_decision(self.config, state, thetas, betas)
        return efficacy_interim_decision(self.config, state, thetas)


class MonitoringDecider(BayesianDecider):
    """Records every interim probability and never stops early."""

    def __call__(self, state: TrialState, rng: np.random.Generator) -> InterimLook:
        thetas, betas = self.draws(state, rng)
        return monitoring_look(self.config, state, thetas, betas)


# ---------------------------------------------------------------------------
# State machine
# ---------------------------------------------------------------------------


def _gap(config: DesignConfig, rng: np.random.Generator) -> float:
    if config.accrual == "deterministic":
        return 1.0 / config.accrual_rate
    return float(rng.exponential(1.0 / config.accrual_rate))


def _fresh_state(n_arms: int) -> TrialState:
    return TrialState(
        active_arm=1,
        status=ENROLLING,
        clock=0.0,
        enrollments=[0] * n_arms,
        total=0,
        last_enrollment=[None] * n_arms,
        patients=[],
    )


def run_trial(
    config: DesignConfig,
    scenario: Scenario,
    seed: SeedLike,
    decider: Optional[Decider] = None,
    keep_patients: bool = True,
) -> TrialRecord:
    """Simulate one trial from first enrollment to the final decision."""
    if scenario.n_arms != config.n_arms:
        raise ValueError(
            f"scenario '{scenario.label}' has {scenario.n_arms} arms, design has {config.n_arms}"
        )
    if decider is None:
        decider = BayesianDecider(config)

    streams = trial_streams(seed)
    state = _fresh_state(config.n_arms)
    verdicts = [NEVER_TESTED] * config.n_arms
    decision_times: List[Optional[float]] = [None] * config.n_arms
    interims: List[InterimLook] = []
    next_arrival = _gap(config, streams.accrual)
    index = 0

    while state.status != TERMINATED:
        index += 1
        clock = index * config.interim_period
        k = state.active_arm
        arm = scenario.arms[k - 1]

        while state.status == ENROLLING and next_arrival <= clock:
            if state.enrollments[k - 1] >= config.max_per_arm or state.total >= config.max_total:
                break
            state.patients.append(
                PatientRecord(
                    arm=k,
                    enroll_time=next_arrival,
                    efficacy_time=float(arm.efficacy.sample(streams.outcomes)),
                    toxicity_time=float(arm.toxicity.sample(streams.outcomes)),
                )
            )
            state.enrollments[k - 1] += 1
            state.total += 1
            state.last_enrollment[k - 1] = next_arrival
            next_arrival += _gap(config, streams.accrual)

        state.clock = clock
        if state.enrollments[k - 1] == 0:
            continue

        look = decider(state, streams.interim(index))
        interims.append(look)
        logger.debug(
            "t=%g arm %d n=%d: %s (P_NI=%s, P_I=%s)",
            clock, k, look.n_arm, look.decision, look.prob_ni, look.prob_inferior,
        )

        if look.decision in VERDICT_FOR_DECISION:
            verdicts[k - 1] = VERDICT_FOR_DECISION[look.decision]
            decision_times[k - 1] = clock
            room = state.total <= config.max_total - config.max_per_arm
            if look.decision == DECLARE_NI and k < config.n_arms and room:
                state.active_arm = k + 1
                state.status = ENROLLING
                next_arrival = clock + _gap(config, streams.accrual)
            else:
                state.status = TERMINATED
        elif look.decision == PAUSE:
            state.status = PAUSED
        else:
            state.status = ENROLLING

    return TrialRecord(
        verdicts=verdicts,
        decision_times=decision_times,
        enrollments=list(state.enrollments),
        duration=state.clock,
        interims=interims,
        patients=state.patients if keep_patients else [],
    )


def trace_single_arm(
    config: DesignConfig, arm: ArmScenario, seed: SeedLike
) -> List[InterimLook]:
    """Interim probabilities of one arm run to m_max and t_FU without stopping."""
    single = config.single_arm()
    record = run_trial(
        single,
        Scenario("trace", (arm,)),
        seed,
        decider=MonitoringDecider(single),
        keep_patients=False,
    )
    return record.interims


# ---------------------------------------------------------------------------
# Replaying an interim from patient data
# ---------------------------------------------------------------------------


def clock_index(config: DesignConfig, clock: float) -> int:
    """Interim index of an analysis clock (months / interim period)."""
    return max(1, int(math.floor(clock / config.interim_period + 1e-9)))


def state_at(config: DesignConfig, patients: Sequence[PatientRecord], clock: float) -> TrialState:
    """Rebuild Sigma_t: patients enrolled by the clock, highest arm with data active."""
    state = _fresh_state(config.n_arms)
    state.clock = clock
    for p in patients:
        if not 1 <= p.arm <= config.n_arms:
            raise ValueError(f"patient references arm {p.arm}; design has {config.n_arms} arms")
        if p.enroll_time > clock:
            continue
        state.patients.append(p)
        state.enrollments[p.arm - 1] += 1
        state.total += 1
        last = state.last_enrollment[p.arm - 1]
        state.last_enrollment[p.arm - 1] = p.enroll_time if last is None else max(
            last, p.enroll_time
        )
    opened = [a for a in range(1, config.n_arms + 1) if state.enrollments[a - 1] > 0]
    state.active_arm = max(opened) if opened else 1
    if state.enrollments[state.active_arm - 1] >= config.max_per_arm:
        state.status = PAUSED
    return state


def replay_interim(
    config: DesignConfig,
    patients: Sequence[PatientRecord],
    clock: float,
    seed: SeedLike,
    decider: Optional[Decider] = None,
) -> Optional[InterimLook]:
    """The decision the engine takes at `clock`; None when the active arm has no data."""
    state = state_at(config, patients, clock)
    if state.enrollments[state.active_arm - 1] == 0:
        return None
    if decider is None:
        decider = BayesianDecider(config)
    return decider(state, interim_rng(seed, clock_index(config, clock)))


def patient_rows(record: TrialRecord, cutoff: Optional[float] = None) -> List[dict]:
    """PatientDataFile rows with both outcomes censored at the cutoff (default: trial end)."""
    cutoff = record.duration if cutoff is None else cutoff
    rows = []
    for p in record.patients:
        follow = cutoff - p.enroll_time
        rows.append(
            {
                "arm": p.arm,
                "enroll_month": p.enroll_time,
                "pfs_months": min(p.efficacy_time, follow),
                "pfs_event": int(p.efficacy_time <= follow),
                "ae_months": min(p.toxicity_time, follow),
                "ae_event": int(p.toxicity_time <= follow),
            }
        )
    return rows
