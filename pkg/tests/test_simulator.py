"""Tests for scenario sets, operating-characteristic summaries and the simulation driver."""
import math
from dataclasses import replace

import pytest

from app.core.calibration import apply_calibration, calibrate_design
from app.core.models import (
    CO_PRIMARY,
    INFERIOR_STOP,
    NEVER_TESTED,
    NON_INFERIOR,
    NOT_REJECTED,
    TOXICITY_STOP,
    ArmScenario,
    BoundarySpec,
    DesignConfig,
    MissingCalibrationError,
    Scenario,
    TrialRecord,
)
from app.core.simulator import (
    BAYESIAN,
    COMPARATOR,
    ScenarioSet,
    futility_curve,
    mean_estimate,
    null_arms,
    proportion,
    require_calibrated,
    sample_size_search,
    simulate_oc,
    summarize,
)
from app.core.survival import exponential_with_rmst

# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

HORIZON = 24.0

DESIGN = DesignConfig(
    n_arms=2,
    theta0=22.0,
    delta=2.0,
    horizon=HORIZON,
    follow_up=3.0,
    accrual_rate=10.0,
    b_ni=BoundarySpec(scale=0.2),
    posterior_draws=100,
).with_max_per_arm(20)

NULL_ARM = ArmScenario(exponential_with_rmst(20.0, HORIZON))
SOC_ARM = ArmScenario(exponential_with_rmst(22.0, HORIZON))


def _record(verdicts, times, enrollments, duration):
    return TrialRecord(
        verdicts=list(verdicts),
        decision_times=list(times),
        enrollments=list(enrollments),
        duration=duration,
    )


@pytest.fixture
def records():
    """Four hand-built two-arm trials."""
    return [
        _record([NON_INFERIOR, INFERIOR_STOP], [5.0, 9.0], [20, 12], 9.0),
        _record([NON_INFERIOR, NOT_REJECTED], [4.0, 12.0], [20, 20], 12.0),
        _record([INFERIOR_STOP, NEVER_TESTED], [2.0, None], [8, 0], 2.0),
        _record([TOXICITY_STOP, NEVER_TESTED], [3.0, None], [10, 0], 3.0),
    ]


@pytest.fixture
def scenario_set():
    return ScenarioSet(
        [Scenario("null", (NULL_ARM, NULL_ARM)), Scenario("soc", (SOC_ARM, NULL_ARM))],
        HORIZON,
    )


# ---------------------------------------------------------------------------
# ScenarioSet
# ---------------------------------------------------------------------------


def test_annotations_are_rmsts(scenario_set):
    """Each arm is annotated with (theta, beta) at the horizon."""
    theta, beta = scenario_set.annotations[1][0]
    assert theta == pytest.approx(22.0, abs=1e-6)
    assert beta == HORIZON
    assert len(scenario_set) == 2


def test_labels_must_be_unique():
    """Two scenarios with the same label are refused."""
    with pytest.raises(ValueError, match="unique"):
        ScenarioSet([Scenario("a", (NULL_ARM,)), Scenario("a", (SOC_ARM,))], HORIZON)


def test_declared_theta_checked(scenario_set):
    """A declared theta off the computed RMST is refused."""
    scenario_set.check_declared(0, 1, theta=20.0)
    with pytest.raises(ValueError, match="declared theta"):
        scenario_set.check_declared(0, 1, theta=21.0)


# ---------------------------------------------------------------------------
# Estimates
# ---------------------------------------------------------------------------


def test_proportion_binomial_se():
    """p = 0.3 over 100 replicates has SE sqrt(0.21 / 100)."""
    est = proportion(30, 100)
    assert est.estimate == pytest.approx(0.3)
    assert est.mc_se == pytest.approx(math.sqrt(0.21 / 100))


def test_mean_estimate_single_value():
    """One value has no spread."""
    est = mean_estimate([7.0])
    assert est.estimate == 7.0
    assert est.mc_se == 0.0


# ---------------------------------------------------------------------------
# summarize / futility_curve
# ---------------------------------------------------------------------------


def test_verdict_probabilities_partition(records):
    """Per arm, the five verdict probabilities add up to one."""
    oc = summarize(DESIGN, "hand", [(20.0, HORIZON), (20.0, HORIZON)], records, seed=0)
    for arm in oc.arms:
        total = (
            arm.power.estimate + arm.futility.estimate + arm.toxicity.estimate
            + arm.not_tested.estimate + arm.not_rejected.estimate
        )
        assert total == pytest.approx(1.0)
    assert oc.arm(1).power.estimate == 0.5
    assert oc.arm(2).not_tested.estimate == 0.5
    assert oc.arm(1).enrollment.estimate == pytest.approx(14.5)


def test_type_one_error_counts_null_declarations(records):
    """Trials declaring any null arm count once toward the type I error."""
    oc = summarize(DESIGN, "hand", [(20.0, HORIZON), (20.0, HORIZON)], records, seed=0)
    assert oc.type_one_error.estimate == 0.5


def test_no_null_arms_no_type_one_error(records):
    """Scenarios without a null arm report no type I error."""
    oc = summarize(DESIGN, "hand", [(23.0, HORIZON), (23.0, HORIZON)], records, seed=0)
    assert oc.type_one_error is None


def test_null_arms_coprimary():
    """Co-primary nulls include arms without a toxicity gain."""
    config = DesignConfig(
        n_arms=2, endpoint=CO_PRIMARY, beta0=12.49, delta_low=1.0
    )
    assert null_arms(config, [(21.0, 12.49), (21.0, 15.0)]) == [1]
    assert null_arms(config, [(19.0, 15.0), (23.0, 20.0)]) == [1]


def test_futility_curve(records):
    """Arm-1 stops at months 2 and 3 out of four trials."""
    curve = dict(futility_curve(records))
    assert curve[1.0] == 0.0
    assert curve[2.0] == 0.25
    assert curve[3.0] == 0.5
    assert curve[12.0] == 0.5
    assert max(curve) == 12.0


# ---------------------------------------------------------------------------
# simulate_oc / sample_size_search
# ---------------------------------------------------------------------------


def test_uncalibrated_design_refused(scenario_set):
    """A Bayesian simulation needs every scale set."""
    with pytest.raises(MissingCalibrationError, match="b_ni"):
        require_calibrated(DesignConfig(), BAYESIAN)


def test_comparator_needs_section():
    """Comparator simulation needs a comparator design."""
    with pytest.raises(ValueError, match="comparator"):
        require_calibrated(DESIGN, COMPARATOR)


def test_simulate_needs_enough_replicates(scenario_set):
    """Fewer than the minimum replicate count is refused."""
    with pytest.raises(ValueError):
        simulate_oc(DESIGN, scenario_set, 10, seed=1)


def test_simulate_unknown_kind(scenario_set):
    """Only the Bayesian and comparator designs can be simulated."""
    with pytest.raises(ValueError):
        simulate_oc(DESIGN, scenario_set, 100, seed=1, kind="oracle")


def test_simulate_reports_every_scenario(scenario_set):
    """One report per scenario, each with the replicate count."""
    reports = simulate_oc(DESIGN, scenario_set, 100, seed=1, workers=1)
    assert [r.label for r in reports] == ["null", "soc"]
    assert all(r.n_sims == 100 for r in reports)
    assert reports[0].type_one_error is not None


@pytest.mark.slow
def test_results_independent_of_workers(scenario_set):
    """Serial and process-parallel runs agree exactly."""
    serial = simulate_oc(DESIGN, scenario_set, 100, seed=4, workers=1)
    parallel = simulate_oc(DESIGN, scenario_set, 100, seed=4, workers=2)
    for a, b in zip(serial, parallel):
        assert a.arm(1).power == b.arm(1).power
        assert a.duration == b.duration
        assert a.futility_curve == b.futility_curve


@pytest.mark.parametrize("grid", [[], [30, 20], [20, 20]])
def test_sample_size_grid_must_ascend(grid):
    """The m_max grid must be non-empty and strictly ascending."""
    with pytest.raises(ValueError):
        sample_size_search(DESIGN, Scenario("soc", (SOC_ARM, SOC_ARM)), 0.8, grid, 100, seed=0)


def test_sample_size_target_range():
    """Target power outside [0, 1] is refused."""
    with pytest.raises(ValueError):
        sample_size_search(DESIGN, Scenario("soc", (SOC_ARM, SOC_ARM)), 1.5, [20], 100, seed=0)


@pytest.mark.slow
def test_zero_target_takes_smallest_grid_point():
    """Any power reaches a target of 0."""
    scenario = Scenario("soc", (SOC_ARM, SOC_ARM))
    result = sample_size_search(DESIGN, scenario, 0.0, [10, 20], 100, seed=0, workers=1)
    assert result.reached
    assert result.recommended == 10
    assert [p.m_max for p in result.curve] == [10, 20]


# ---------------------------------------------------------------------------
# Calibrated operating characteristics
# ---------------------------------------------------------------------------

ONE_ARM = DesignConfig(
    n_arms=1,
    theta0=22.0,
    delta=2.0,
    horizon=HORIZON,
    follow_up=3.0,
    accrual_rate=10.0,
    posterior_draws=100,
).with_max_per_arm(20)


def _calibrated_oc(config, scenario, seed, n_sims=300):
    calibration = calibrate_design(config, n_sims, seed, workers=1, check=False)
    config = apply_calibration(config, calibration)
    scenarios = ScenarioSet([scenario], HORIZON)
    return simulate_oc(config, scenarios, n_sims, seed + 1, workers=1)[0]


def _assert_non_decreasing(estimates):
    for a, b in zip(estimates, estimates[1:]):
        assert b.estimate >= a.estimate - 3 * math.hypot(a.mc_se, b.mc_se)


@pytest.mark.slow
def test_power_and_duration_grow_with_ni_shape():
    """Recalibrated at each S_NI, power and average duration do not fall."""
    reports = [
        _calibrated_oc(
            replace(ONE_ARM, b_ni=BoundarySpec(shape=shape, m_max=20)),
            Scenario("soc", (SOC_ARM,)),
            seed=40,
        )
        for shape in (1.0, 3.0, 6.0)
    ]
    _assert_non_decreasing([r.arm(1).power for r in reports])
    _assert_non_decreasing([r.duration for r in reports])


@pytest.mark.slow
def test_power_grows_with_ni_activation():
    """Recalibrated at each m_NI, power does not fall."""
    reports = [
        _calibrated_oc(
            replace(ONE_ARM, b_ni=BoundarySpec(activation=m_ni, m_max=20)),
            Scenario("soc", (SOC_ARM,)),
            seed=50,
        )
        for m_ni in (0, 5, 10)
    ]
    _assert_non_decreasing([r.arm(1).power for r in reports])


@pytest.mark.slow
def test_inferior_first_arm_rarely_opens_the_second():
    """With arm 1 at theta0 - delta, arm 2 starts in about alpha of trials or fewer."""
    config = replace(ONE_ARM, n_arms=2).with_max_per_arm(20)
    oc = _calibrated_oc(config, Scenario("gate", (NULL_ARM, SOC_ARM)), seed=60, n_sims=400)
    started = 1.0 - oc.arm(2).not_tested.estimate
    assert started <= config.alpha + 4 * math.sqrt(0.09 / 400)
