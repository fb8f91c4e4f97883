"""
Domain models for deintensify.
Defines design configurations, decision boundaries, trial state and
the records a simulated (or real) trial leaves behind.
"""
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .survival import NoEventDistribution, ScenarioDistribution

# Endpoint modes
EFFICACY = "efficacy"
CO_PRIMARY = "co-primary"
ENDPOINTS = (EFFICACY, CO_PRIMARY)

# Interim decisions
CONTINUE = "continue"
PAUSE = "pause"
DECLARE_NI = "declare-NI"
STOP_INFERIOR = "stop-inferior"
STOP_TOXICITY = "stop-toxicity"
CLOSE_NOT_REJECTED = "close-not-rejected"
DECISIONS = (CONTINUE, PAUSE, DECLARE_NI, STOP_INFERIOR, STOP_TOXICITY, CLOSE_NOT_REJECTED)

# Study status between interims (D_{t,2})
ENROLLING = "enrolling"
PAUSED = "paused"
TERMINATED = "terminated"

# Per-arm verdicts
NON_INFERIOR = "non-inferior"
INFERIOR_STOP = "inferior-stop"
TOXICITY_STOP = "toxicity-stop"
NOT_REJECTED = "not-rejected-at-followup"
NEVER_TESTED = "never-tested"
VERDICTS = (NON_INFERIOR, INFERIOR_STOP, TOXICITY_STOP, NOT_REJECTED, NEVER_TESTED)

VERDICT_FOR_DECISION = {
    DECLARE_NI: NON_INFERIOR,
    STOP_INFERIOR: INFERIOR_STOP,
    STOP_TOXICITY: TOXICITY_STOP,
    CLOSE_NOT_REJECTED: NOT_REJECTED,
}

ACCRUAL_KINDS = ("poisson", "deterministic")
SPENDING_KINDS = ("obrien-fleming", "pocock", "linear")
FUTILITY_RULES = ("F1", "F2", "F3", "none")


class DesignValidationError(ValueError):
    """A design document violates one or more invariants."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class MissingCalibrationError(ValueError):
    """A boundary scale is still unset where a calibrated design is required."""


@dataclass(frozen=True)
class BoundarySpec:
    """One boundary b(l) = 1 - scale * max(0, (l - activation)/(m_max - activation))**shape.

    scale is None until calibration fills it in.
    """
    scale: Optional[float] = None
    shape: float = 1.0
    activation: int = 0
    m_max: int = 100

    @property
    def calibrated(self) -> bool:
        return self.scale is not None

    def with_scale(self, scale: float) -> "BoundarySpec":
        return replace(self, scale=float(scale))

    def violations(self, name: str) -> List[str]:
        problems = []
        if self.scale is not None and not 0.0 <= self.scale <= 1.0:
            problems.append(f"{name}.scale: must lie in [0, 1], got {self.scale}")
        if not self.shape >= 0:
            problems.append(f"{name}.shape: must be >= 0, got {self.shape}")
        if not 0 <= self.activation <= self.m_max:
            problems.append(
                f"{name}.activation: must lie in [0, max_per_arm={self.m_max}], "
                f"got {self.activation}"
            )
        return problems


@dataclass(frozen=True)
class PriorSpec:
    """Beta-Stacy prior: centre distribution (houses V0) and weight c."""
    center: ScenarioDistribution
    weight: float = 10.0


@dataclass(frozen=True)
class SpendingFunction:
    kind: str = "obrien-fleming"
    alpha: float = 0.1


@dataclass(frozen=True)
class RciDesignConfig:
    """Repeated-confidence-interval comparator design."""
    ni_spending: SpendingFunction = field(default_factory=SpendingFunction)
    futility: str = "F1"
    futility_spending: SpendingFunction = field(
        default_factory=lambda: SpendingFunction("obrien-fleming", 0.025)
    )
    min_enrollment: int = 50
    bootstrap: int = 500

    def violations(self) -> List[str]:
        problems = []
        if self.ni_spending.kind not in SPENDING_KINDS:
            problems.append(f"comparator.ni_spending.kind: unknown '{self.ni_spending.kind}'")
        if self.futility_spending.kind not in SPENDING_KINDS:
            problems.append(
                f"comparator.futility_spending.kind: unknown '{self.futility_spending.kind}'"
            )
        for name, sf in (("ni_spending", self.ni_spending),
                         ("futility_spending", self.futility_spending)):
            if not 0 < sf.alpha < 1:
                problems.append(f"comparator.{name}.alpha: must lie in (0, 1)")
        if self.futility not in FUTILITY_RULES:
            problems.append(f"comparator.futility: must be one of {FUTILITY_RULES}")
        if self.min_enrollment < 2:
            problems.append("comparator.min_enrollment: must be >= 2")
        if self.bootstrap < 2:
            problems.append("comparator.bootstrap: must be >= 2")
        return problems


@dataclass(frozen=True)
class DesignConfig:
    """Complete description of a de-intensification design."""
    n_arms: int = 2
    theta0: float = 22.0
    delta: float = 2.0
    horizon: float = 24.0
    arm_margins: Optional[tuple] = None  # per-arm delta_k; None means delta for every arm
    delta_low: Optional[float] = None
    beta0: Optional[float] = None
    delta_beta: float = 0.0
    b_ni: BoundarySpec = field(default_factory=BoundarySpec)
    b_inf: BoundarySpec = field(default_factory=lambda: BoundarySpec(scale=0.0))
    b_tox: BoundarySpec = field(default_factory=lambda: BoundarySpec(scale=0.0))
    b_margin: Optional[BoundarySpec] = None  # B_T; derived from b_tox when None
    max_total: int = 200
    max_per_arm: int = 100
    follow_up: float = 12.0
    accrual_rate: float = 5.0
    accrual: str = "poisson"
    interim_period: float = 1.0
    alpha: float = 0.1
    endpoint: str = EFFICACY
    efficacy_prior: Optional[PriorSpec] = None
    toxicity_prior: Optional[PriorSpec] = None
    historical_efficacy: Optional[ScenarioDistribution] = None
    historical_toxicity: Optional[ScenarioDistribution] = None
    monotone_efficacy: bool = False
    monotone_toxicity: bool = False
    p_inferior: float = 0.0
    p_toxicity: float = 0.0
    posterior_draws: int = 1000
    proposal_budget: int = 100
    grid_step: float = 0.25
    grid_horizon: float = 36.0
    comparator: Optional[RciDesignConfig] = None

    @property
    def co_primary(self) -> bool:
        return self.endpoint == CO_PRIMARY

    @property
    def ni_threshold(self) -> float:
        """theta0 - delta: the RMST at and below which an arm is inferior."""
        return self.theta0 - self.delta

    def margin_for(self, arm: int) -> float:
        """Efficacy-only futility margin delta_k for a 1-based arm index."""
        if self.arm_margins is None:
            return self.delta
        return float(self.arm_margins[arm - 1])

    def margin_boundary(self) -> BoundarySpec:
        """B_T: the configured boundary, else b_T's shape/activation.

        Without an explicit scale B_T takes (1 + s_T)/2.
        """
        s_tox = self.b_tox.scale if self.b_tox.scale is not None else 0.0
        derived = (1.0 + s_tox) / 2.0
        if self.b_margin is not None:
            return self.b_margin if self.b_margin.calibrated else self.b_margin.with_scale(derived)
        return replace(self.b_tox, scale=derived)

    def with_max_per_arm(self, m_max: int) -> "DesignConfig":
        """Same design at a different per-arm cap (boundaries follow, n = K * m_max)."""
        def moved(b: Optional[BoundarySpec]) -> Optional[BoundarySpec]:
            if b is None:
                return None
            return replace(b, m_max=m_max, activation=min(b.activation, m_max))

        return replace(
            self,
            max_per_arm=m_max,
            max_total=self.n_arms * m_max,
            b_ni=moved(self.b_ni),
            b_inf=moved(self.b_inf),
            b_tox=moved(self.b_tox),
            b_margin=moved(self.b_margin),
        )

    def violations(self) -> List[str]:
        """Every invariant violation, one message per problem."""
        from .rules import boundary_value

        problems: List[str] = []
        if self.n_arms < 1:
            problems.append("n_arms: must be >= 1")
        if self.endpoint not in ENDPOINTS:
            problems.append(f"endpoint: must be one of {ENDPOINTS}, got '{self.endpoint}'")
        if not self.horizon > 0:
            problems.append("horizon: must be > 0")
        if not self.delta > 0:
            problems.append("delta: must be > 0")
        if self.arm_margins is not None:
            if len(self.arm_margins) != self.n_arms:
                problems.append(f"arm_margins: expected {self.n_arms} values")
            for k, dk in enumerate(self.arm_margins, start=1):
                if not 0 < dk <= self.delta:
                    problems.append(
                        f"arm_margins[{k}]: must satisfy delta >= delta_k > 0, got {dk}"
                    )
        if self.delta_low is not None:
            if not self.delta_low > 0:
                problems.append("delta_low: must be > 0")
            if self.delta_low > self.delta:
                problems.append(
                    "delta_low: adaptive margin requires delta >= delta_low "
                    f"(got delta={self.delta}, delta_low={self.delta_low})"
                )
        if self.co_primary:
            if self.beta0 is None:
                problems.append("beta0: required in co-primary mode")
            if self.delta_low is None:
                problems.append("delta_low: required in co-primary mode")
            if self.delta_beta < 0:
                problems.append("delta_beta: must be >= 0 in co-primary mode")
        if self.max_per_arm < 1:
            problems.append("max_per_arm: must be >= 1")
        if self.max_total < self.max_per_arm:
            problems.append(
                f"max_total: must be >= max_per_arm ({self.max_total} < {self.max_per_arm})"
            )
        for name in ("b_ni", "b_inf", "b_tox", "b_margin"):
            b = getattr(self, name)
            if b is None:
                continue
            problems.extend(b.violations(name))
            if b.m_max != self.max_per_arm:
                problems.append(f"{name}: boundary cap {b.m_max} != max_per_arm")
        if self.follow_up < 0:
            problems.append("follow_up: must be >= 0")
        if not self.accrual_rate > 0:
            problems.append("accrual_rate: must be > 0")
        if self.accrual not in ACCRUAL_KINDS:
            problems.append(f"accrual: must be one of {ACCRUAL_KINDS}")
        if not self.interim_period > 0:
            problems.append("interim_period: must be > 0")
        if not 0 < self.alpha <= 1:
            problems.append("alpha: must lie in (0, 1]")
        for name in ("p_inferior", "p_toxicity"):
            if not 0 <= getattr(self, name) < 1:
                problems.append(f"{name}: must lie in [0, 1)")
        if self.posterior_draws < 1:
            problems.append("posterior_draws: must be >= 1")
        if self.proposal_budget < 1:
            problems.append("proposal_budget: must be >= 1")
        if not self.grid_step > 0:
            problems.append("grid_step: must be > 0")
        if self.grid_horizon < self.horizon:
            problems.append("grid_horizon: must be >= horizon")
        for name in ("efficacy_prior", "toxicity_prior"):
            prior = getattr(self, name)
            if prior is not None and not prior.weight > 0:
                problems.append(f"{name}.weight: must be > 0")
        if self.comparator is not None:
            problems.extend(self.comparator.violations())

        if self.co_primary and self.b_tox.scale is not None:
            b_low = self.margin_boundary()
            if b_low.scale is not None and not problems:
                for ell in range(1, self.max_per_arm + 1):
                    upper = boundary_value(self.b_tox, ell)
                    lower = boundary_value(b_low, ell)
                    if upper < 1.0 and not lower < upper:
                        problems.append(
                            f"b_margin: B_T({ell}) = {lower:.6g} must be below "
                            f"b_T({ell}) = {upper:.6g}"
                        )
                        break
        return problems

    def check(self) -> "DesignConfig":
        problems = self.violations()
        if problems:
            raise DesignValidationError(problems)
        return self

    def single_arm(self) -> "DesignConfig":
        """The arm-1 design on its own, as simulated during calibration."""
        margins = None if self.arm_margins is None else (self.margin_for(1),)
        return replace(self, n_arms=1, arm_margins=margins, max_total=self.max_per_arm)


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArmScenario:
    """True outcome laws of one arm: F_k for efficacy, G_k for toxicity."""
    efficacy: ScenarioDistribution
    toxicity: ScenarioDistribution = field(default_factory=NoEventDistribution)

    def summaries(self, horizon: float) -> Tuple[float, float]:
        return self.efficacy.rmst(horizon), self.toxicity.rmst(horizon)


@dataclass(frozen=True)
class Scenario:
    label: str
    arms: Tuple[ArmScenario, ...]

    @property
    def n_arms(self) -> int:
        return len(self.arms)


# ---------------------------------------------------------------------------
# Trial state and records
# ---------------------------------------------------------------------------


@dataclass
class PatientRecord:
    """(T_i, C_i, Y_i, X_i): enrollment month, arm, latent outcome times.

    The censor fields hold the months from enrollment to last follow-up for
    outcomes observed as censored; the outcome is never looked at past them.
    """
    arm: int
    enroll_time: float
    efficacy_time: float
    toxicity_time: float = np.inf
    efficacy_censor: float = np.inf
    toxicity_censor: float = np.inf


@dataclass
class TrialState:
    """Sigma_t plus D_t: everything the design knows at clock t."""
    active_arm: Optional[int] = 1
    status: str = ENROLLING
    clock: float = 0.0
    enrollments: List[int] = field(default_factory=list)
    total: int = 0
    last_enrollment: List[Optional[float]] = field(default_factory=list)
    patients: List[PatientRecord] = field(default_factory=list)

    def arm_view(self, arm: int, clock: float, toxicity: bool = False):
        """Censored (times, events) arrays for one arm as of clock."""
        rows = [p for p in self.patients if p.arm == arm and p.enroll_time <= clock]
        follow = np.array(
            [
                min(clock - p.enroll_time, p.toxicity_censor if toxicity else p.efficacy_censor)
                for p in rows
            ],
            dtype=float,
        )
        latent = np.array(
            [p.toxicity_time if toxicity else p.efficacy_time for p in rows], dtype=float
        )
        return np.minimum(latent, follow), latent <= follow


@dataclass
class InterimLook:
    """One interim analysis of the active arm."""
    clock: float
    arm: int
    n_arm: int
    decision: str = CONTINUE
    prob_ni: Optional[float] = None
    prob_inferior: Optional[float] = None
    prob_toxicity: Optional[float] = None
    margin: Optional[float] = None
    b_ni: Optional[float] = None
    b_inf: Optional[float] = None
    b_tox: Optional[float] = None
    b_margin: Optional[float] = None
    estimate: Optional[float] = None
    std_error: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    p_value: Optional[float] = None
    degenerate: bool = False


@dataclass
class TrialRecord:
    """The realized trajectory of one trial."""
    verdicts: List[str]
    decision_times: List[Optional[float]]
    enrollments: List[int]
    duration: float = 0.0
    interims: List[InterimLook] = field(default_factory=list)
    patients: List[PatientRecord] = field(default_factory=list)

    @property
    def n_arms(self) -> int:
        return len(self.verdicts)

    @property
    def total_enrollment(self) -> int:
        return int(sum(self.enrollments))

    def started(self, arm: int) -> bool:
        return self.verdicts[arm - 1] != NEVER_TESTED
