"""
Monte-Carlo calibration of boundary scales.

Each simulated single-arm trial under a null scenario is run to m_max and
t_FU without stopping; its trace gives the smallest boundary scale that
would have made the rule fire (the critical scale). A scale is then the
lower empirical quantile of the critical scales:

    s_T   p_T-quantile under (F0, G0)                      co-primary only
    s_I   p_I-quantile under (PH-inferior F, G0)
    s_NI  alpha-quantile per null member, minimum over the family

in that order, since s_NI is only admissible up to the first futility stop.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Dict, List, Optional, Sequence

import numpy as np

from .. import __version__
from .engine import trace_single_arm
from .models import (
    ArmScenario,
    BoundarySpec,
    DesignConfig,
    InterimLook,
    MissingCalibrationError,
)
from .rules import futility_fired
from .streams import child, parallel_map
from .survival import (
    RMST_TOLERANCE,
    TRANSFORM_KINDS,
    NoEventDistribution,
    ScenarioDistribution,
    TargetUnreachableError,
    apply_transform,
    exponential_with_rmst,
    solve_transform_to_rmst,
)

logger = logging.getLogger(__name__)

MIN_SIMULATIONS = 100

INFERIORITY = "inferiority"
TOXICITY = "toxicity"
FUTILITY_RULES = (INFERIORITY, TOXICITY)

INTERIOR_LABEL = "interior"

# Stream keys per calibration stage so stages never share replicates
_TOXICITY_STAGE = 0
_INFERIORITY_STAGE = 1
_NI_STAGE = 2
_CHECK_STAGE = 3
_INTERIOR_STAGE = 4
_TOXICITY_CHECK_STAGE = 5
_INFERIORITY_CHECK_STAGE = 6


# ---------------------------------------------------------------------------
# Null scenario families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NullMember:
    """One null scenario with the summaries it was constructed to hit."""
    label: str
    arm: ArmScenario
    target_theta: Optional[float] = None
    target_beta: Optional[float] = None


@dataclass
class NullScenarioFamily:
    co_primary: bool
    members: List[NullMember]

    @property
    def labels(self) -> List[str]:
        return [m.label for m in self.members]

    def member(self, label: str) -> NullMember:
        for m in self.members:
            if m.label == label:
                return m
        raise KeyError(label)

    def check(self, horizon: float) -> None:
        """Every member must hit its targets within the RMST tolerance."""
        for m in self.members:
            theta, beta = m.arm.summaries(horizon)
            if m.target_theta is not None and abs(theta - m.target_theta) > RMST_TOLERANCE:
                raise TargetUnreachableError(
                    f"{m.label}: efficacy RMST {theta:.9g} misses {m.target_theta:.9g}"
                )
            if m.target_beta is not None and abs(beta - m.target_beta) > RMST_TOLERANCE:
                raise TargetUnreachableError(
                    f"{m.label}: toxicity RMST {beta:.9g} misses {m.target_beta:.9g}"
                )


def historical_laws(config: DesignConfig):
    """(F0, G0): configured, or exponentials with RMST theta0 / beta0 at the horizon."""
    f0 = config.historical_efficacy
    if f0 is None:
        f0 = exponential_with_rmst(config.theta0, config.horizon)
    g0 = config.historical_toxicity
    if g0 is None and config.co_primary:
        g0 = exponential_with_rmst(config.beta0, config.horizon)
    elif g0 is None:
        g0 = NoEventDistribution()
    return f0, g0


def _solved(base: ScenarioDistribution, kind: str, target: float, horizon: float):
    return apply_transform(base, solve_transform_to_rmst(base, kind, target, horizon))


def build_null_family(
    config: DesignConfig,
    f0: Optional[ScenarioDistribution] = None,
    g0: Optional[ScenarioDistribution] = None,
) -> NullScenarioFamily:
    """PH/AFT/PO transforms of F0 at theta0 - delta; co-primary adds the extreme sets.

    Co-primary set (i) pairs those transforms with a law that never has an
    AE; set (ii) keeps F0 and moves G to beta0.
    """
    hist_f0, hist_g0 = historical_laws(config)
    f0 = hist_f0 if f0 is None else f0
    g0 = hist_g0 if g0 is None else g0
    horizon = config.horizon
    target = config.ni_threshold

    base_theta = f0.rmst(horizon)
    if not base_theta > target:
        raise TargetUnreachableError(
            f"historical efficacy RMST {base_theta:.6g} must exceed theta0 - delta = {target:.6g}"
        )

    members: List[NullMember] = []
    if not config.co_primary:
        for kind in TRANSFORM_KINDS:
            f = _solved(f0, kind, target, horizon)
            members.append(NullMember(kind, ArmScenario(f, g0), target_theta=target))
    else:
        for kind in TRANSFORM_KINDS:
            f = _solved(f0, kind, target, horizon)
            no_ae = ArmScenario(f, NoEventDistribution())
            members.append(NullMember(f"no-ae-{kind}", no_ae, target_theta=target))
        beta0 = config.beta0
        if abs(g0.rmst(horizon) - beta0) <= RMST_TOLERANCE:
            members.append(NullMember("soc-efficacy", ArmScenario(f0, g0), target_beta=beta0))
        else:
            for kind in TRANSFORM_KINDS:
                g = _solved(g0, kind, beta0, horizon)
                members.append(
                    NullMember(f"soc-efficacy-{kind}", ArmScenario(f0, g), target_beta=beta0)
                )

    family = NullScenarioFamily(config.co_primary, members)
    family.check(horizon)
    return family


# ---------------------------------------------------------------------------
# Critical scales and quantiles
# ---------------------------------------------------------------------------


def boundary_factor(b: BoundarySpec, ell: int) -> float:
    """max[0, (l - m)/(m_max - m)] ** S, or 0 while the rule is inactive."""
    if ell < b.activation:
        return 0.0
    if b.m_max == b.activation:
        return 1.0
    ratio = max(0.0, (ell - b.activation) / (b.m_max - b.activation))
    if ratio == 0.0 and b.shape > 0:
        return 0.0
    return ratio ** b.shape


def critical_scale_ni(looks: Sequence[InterimLook], b_ni: BoundarySpec) -> float:
    """min over admissible interims of (1 - U_NI,t) / factor_t; +inf if none qualifies.

    An interim is admissible while no futility rule has fired at it or before it.
    """
    if not looks:
        raise ValueError("critical scale needs a non-empty trace")
    best = math.inf
    for look in looks:
        if futility_fired(look):
            break
        factor = boundary_factor(b_ni, look.n_arm)
        if factor <= 0.0:
            continue
        best = min(best, (1.0 - look.prob_ni) / factor)
    return best


def critical_scale_futility(
    looks: Sequence[InterimLook], boundary: BoundarySpec, rule: str
) -> float:
    """Smallest scale at which the futility rule would stop this trial (NI ignored)."""
    if not looks:
        raise ValueError("critical scale needs a non-empty trace")
    best = math.inf
    for look in looks:
        factor = boundary_factor(boundary, look.n_arm)
        if factor <= 0.0:
            continue
        prob = look.prob_toxicity if rule == TOXICITY else look.prob_inferior
        best = min(best, (1.0 - prob) / factor)
    return best


def lower_quantile(values: Sequence[float], q: float) -> float:
    """Order statistic ceil(q * C) (1-based) of the sorted values, clipped to [0, 1]."""
    if not len(values):
        raise ValueError("quantile of an empty set")
    if not 0 < q <= 1:
        raise ValueError(f"quantile level must lie in (0, 1], got {q}")
    ordered = np.sort(np.asarray(values, dtype=float))
    index = max(1, math.ceil(round(q * ordered.size, 9)))
    return float(min(max(ordered[index - 1], 0.0), 1.0))


# ---------------------------------------------------------------------------
# Replicate workers (module level so they pickle)
# ---------------------------------------------------------------------------


def _ni_worker(config: DesignConfig, arm: ArmScenario, seed) -> float:
    return critical_scale_ni(trace_single_arm(config, arm, seed), config.b_ni)


def _futility_worker(config: DesignConfig, arm: ArmScenario, rule: str, seed) -> float:
    boundary = config.b_tox if rule == TOXICITY else config.b_inf
    return critical_scale_futility(trace_single_arm(config, arm, seed), boundary, rule)


def _seeds(master: int, stage: int, member: int, n_sims: int):
    return [child(master, stage, member, c) for c in range(n_sims)]


def _check_sims(n_sims: int) -> None:
    if n_sims < MIN_SIMULATIONS:
        raise ValueError(f"calibration needs at least {MIN_SIMULATIONS} simulations, got {n_sims}")


def mc_bound(rate: float, n_sims: int) -> float:
    """rate + 2 binomial Monte-Carlo standard errors."""
    return rate + 2.0 * math.sqrt(rate * (1.0 - rate) / n_sims)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class FutilityCalibration:
    """A futility scale and the stop rate it gives on fresh replicates.

    mc_se is the binomial standard error at the target rate for C replicates.
    """
    rule: str
    target: float
    scale: float
    critical_scales: List[float] = field(default_factory=list)
    stop_rate: Optional[float] = None
    mc_se: Optional[float] = None

    @property
    def within(self) -> bool:
        """Fresh stop rate within two SEs of the target, counting error on both sides."""
        if self.stop_rate is None:
            return True
        return abs(self.stop_rate - self.target) <= 2.0 * math.sqrt(2.0) * self.mc_se


@dataclass
class SelfCheck:
    """Fresh-seed re-simulation of one null scenario at the calibrated s_NI."""
    label: str
    rejection_rate: float
    mc_se: float
    bound: float

    @property
    def within(self) -> bool:
        return self.rejection_rate <= self.bound


@dataclass
class CalibrationResult:
    s_ni: float
    per_scenario: Dict[str, float]
    critical_scales: Dict[str, List[float]]
    n_sims: int
    seed: int
    alpha: float
    s_inf: float = 0.0
    s_tox: float = 0.0
    futility: Dict[str, FutilityCalibration] = field(default_factory=dict)
    self_checks: List[SelfCheck] = field(default_factory=list)
    digest: Optional[str] = None
    version: str = __version__

    @property
    def scale(self) -> float:
        return self.s_ni

    def worst_case(self) -> str:
        """Label of the member that fixed s_NI."""
        return min(self.per_scenario, key=self.per_scenario.get)


# ---------------------------------------------------------------------------
# Calibration procedures
# ---------------------------------------------------------------------------


def calibrate_futility_scale(
    config: DesignConfig,
    scenario: ArmScenario,
    target: float,
    rule: str,
    n_sims: int,
    seed: int,
    workers: Optional[int] = None,
    check: bool = True,
) -> FutilityCalibration:
    """Scale that stops a proportion `target` of trials early under `scenario`.

    target = 0 disables the rule with scale 0 (boundary identically 1). With
    check, the stop rate at that scale is re-estimated on fresh replicates.
    """
    if rule not in FUTILITY_RULES:
        raise ValueError(f"unknown futility rule '{rule}'")
    if not 0 <= target < 1:
        raise ValueError(f"futility target must lie in [0, 1), got {target}")
    if target == 0:
        return FutilityCalibration(rule, target, 0.0)
    _check_sims(n_sims)

    stage = _TOXICITY_STAGE if rule == TOXICITY else _INFERIORITY_STAGE
    worker = partial(_futility_worker, config, scenario, rule)
    scales = parallel_map(worker, _seeds(seed, stage, 0, n_sims), workers)
    scale = lower_quantile(scales, target)
    logger.info("Calibrated %s scale %.6g for target %.3g (C=%d)", rule, scale, target, n_sims)
    result = FutilityCalibration(rule, target, scale, [float(s) for s in scales])
    if check:
        check_stage = _TOXICITY_CHECK_STAGE if rule == TOXICITY else _INFERIORITY_CHECK_STAGE
        fresh = parallel_map(worker, _seeds(seed, check_stage, 0, n_sims), workers)
        # the rule fires on P > 1 - s * factor, i.e. when s exceeds the critical scale
        result.stop_rate = sum(1 for s in fresh if s < scale) / n_sims
        result.mc_se = math.sqrt(target * (1.0 - target) / n_sims)
        if not result.within:
            logger.warning(
                "%s rule stops %.4f of fresh replicates against target %.3g",
                rule, result.stop_rate, target,
            )
    return result


def _reject_rate(config: DesignConfig, scales: Sequence[float], s_ni: float) -> float:
    # co-primary NI uses >=, efficacy-only uses >
    if config.co_primary:
        rejected = sum(1 for s in scales if s <= s_ni)
    else:
        rejected = sum(1 for s in scales if s < s_ni)
    return rejected / len(scales)


def calibrate_s_ni(
    config: DesignConfig,
    family: NullScenarioFamily,
    n_sims: int,
    seed: int,
    workers: Optional[int] = None,
) -> CalibrationResult:
    """alpha-quantile of the critical NI scales per member; s_NI is their minimum.

    Futility scales must already be set on `config`.
    """
    _check_sims(n_sims)
    if not config.b_inf.calibrated or (config.co_primary and not config.b_tox.calibrated):
        raise MissingCalibrationError("futility scales must be fixed before calibrating s_NI")

    per_scenario: Dict[str, float] = {}
    critical: Dict[str, List[float]] = {}
    for i, member in enumerate(family.members):
        worker = partial(_ni_worker, config, member.arm)
        scales = parallel_map(worker, _seeds(seed, _NI_STAGE, i, n_sims), workers)
        critical[member.label] = [float(s) for s in scales]
        per_scenario[member.label] = lower_quantile(scales, config.alpha)
        logger.info("s_NI,%s = %.6g", member.label, per_scenario[member.label])

    s_ni = min(per_scenario.values())
    return CalibrationResult(
        s_ni=s_ni,
        per_scenario=per_scenario,
        critical_scales=critical,
        n_sims=n_sims,
        seed=seed,
        alpha=config.alpha,
        s_inf=config.b_inf.scale,
        s_tox=config.b_tox.scale if config.b_tox.scale is not None else 0.0,
    )


def self_check(
    config: DesignConfig,
    members: Sequence[NullMember],
    s_ni: float,
    n_sims: int,
    seed: int,
    workers: Optional[int] = None,
    stage: int = _CHECK_STAGE,
) -> List[SelfCheck]:
    """Rejection rate of each member at s_NI on fresh replicates."""
    results = []
    for i, member in enumerate(members):
        worker = partial(_ni_worker, config, member.arm)
        scales = parallel_map(worker, _seeds(seed, stage, i, n_sims), workers)
        rate = _reject_rate(config, scales, s_ni)
        results.append(
            SelfCheck(
                label=member.label,
                rejection_rate=rate,
                mc_se=math.sqrt(rate * (1.0 - rate) / n_sims),
                bound=mc_bound(config.alpha, n_sims),
            )
        )
    return results


def interior_null(config: DesignConfig) -> NullMember:
    """theta = theta0 - delta (PH move of F0) together with beta = beta0."""
    f0, g0 = historical_laws(config)
    f = _solved(f0, "ph", config.ni_threshold, config.horizon)
    g = g0
    if abs(g0.rmst(config.horizon) - config.beta0) > RMST_TOLERANCE:
        g = _solved(g0, "ph", config.beta0, config.horizon)
    return NullMember(
        INTERIOR_LABEL,
        ArmScenario(f, g),
        target_theta=config.ni_threshold,
        target_beta=config.beta0,
    )


def calibrate_coprimary(
    config: DesignConfig,
    n_sims: int,
    seed: int,
    workers: Optional[int] = None,
    family: Optional[NullScenarioFamily] = None,
) -> CalibrationResult:
    """s_NI over both extreme null sets, then a spot check on an interior null."""
    if not config.co_primary:
        raise ValueError("co-primary calibration needs endpoint 'co-primary'")
    family = family or build_null_family(config)
    result = calibrate_s_ni(config, family, n_sims, seed, workers)
    interior = self_check(
        config, [interior_null(config)], result.s_ni, n_sims, seed, workers, stage=_INTERIOR_STAGE
    )
    result.self_checks.extend(interior)
    if not interior[0].within:
        logger.warning(
            "Interior null rejects %.4f > %.4f at s_NI=%.6g",
            interior[0].rejection_rate, interior[0].bound, result.s_ni,
        )
    return result


def inferiority_scenario(config: DesignConfig) -> ArmScenario:
    f0, g0 = historical_laws(config)
    return ArmScenario(_solved(f0, "ph", config.ni_threshold, config.horizon), g0)


def calibrate_design(
    config: DesignConfig,
    n_sims: int,
    seed: int,
    workers: Optional[int] = None,
    check: bool = True,
) -> CalibrationResult:
    """Full calibration in order: s_T, s_I, then s_NI with its self-check."""
    _check_sims(n_sims)
    futility: Dict[str, FutilityCalibration] = {}
    f0, g0 = historical_laws(config)

    if config.co_primary and config.p_toxicity > 0:
        tox = calibrate_futility_scale(
            config, ArmScenario(f0, g0), config.p_toxicity, TOXICITY, n_sims, seed, workers,
            check=check,
        )
        futility[TOXICITY] = tox
        config = replace(config, b_tox=config.b_tox.with_scale(tox.scale))
    elif not config.b_tox.calibrated:
        config = replace(config, b_tox=config.b_tox.with_scale(0.0))

    if config.p_inferior > 0:
        inf = calibrate_futility_scale(
            config, inferiority_scenario(config), config.p_inferior, INFERIORITY,
            n_sims, seed, workers, check=check,
        )
        futility[INFERIORITY] = inf
        config = replace(config, b_inf=config.b_inf.with_scale(inf.scale))
    elif not config.b_inf.calibrated:
        config = replace(config, b_inf=config.b_inf.with_scale(0.0))

    family = build_null_family(config, f0, g0)
    if config.co_primary:
        result = calibrate_coprimary(config, n_sims, seed, workers, family)
    else:
        result = calibrate_s_ni(config, family, n_sims, seed, workers)
    result.futility = futility

    if check:
        checks = self_check(config, family.members, result.s_ni, n_sims, seed, workers)
        result.self_checks = checks + result.self_checks
        for c in checks:
            if not c.within:
                logger.warning(
                    "%s rejects %.4f on fresh replicates (bound %.4f)",
                    c.label, c.rejection_rate, c.bound,
                )
    logger.info(
        "Calibrated s_NI=%.6g (worst case %s), s_I=%.6g, s_T=%.6g",
        result.s_ni, result.worst_case(), result.s_inf, result.s_tox,
    )
    return result


def apply_calibration(config: DesignConfig, result: CalibrationResult) -> DesignConfig:
    """Design with every calibrated scale filled in (B_T follows s_T unless configured)."""
    b_margin = config.b_margin
    if b_margin is not None and not b_margin.calibrated:
        b_margin = b_margin.with_scale((1.0 + result.s_tox) / 2.0)
    return replace(
        config,
        b_ni=config.b_ni.with_scale(result.s_ni),
        b_inf=config.b_inf.with_scale(result.s_inf),
        b_tox=config.b_tox.with_scale(result.s_tox),
        b_margin=b_margin,
    )
