"""Tests for decision boundaries and interim decision rules."""
from dataclasses import replace

import numpy as np
import pytest

from app.core.models import (
    CLOSE_NOT_REJECTED,
    CONTINUE,
    CO_PRIMARY,
    DECLARE_NI,
    PAUSE,
    STOP_INFERIOR,
    STOP_TOXICITY,
    BoundarySpec,
    DesignConfig,
    DesignValidationError,
    TrialState,
)
from app.core.rules import (
    adaptive_margin,
    boundary_value,
    coprimary_interim_decision,
    efficacy_interim_decision,
    futility_fired,
    monitoring_look,
    pause_or_continue,
)

# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

EFFICACY_DESIGN = DesignConfig(
    n_arms=2,
    theta0=22.0,
    delta=2.0,
    max_per_arm=100,
    max_total=200,
    b_ni=BoundarySpec(scale=0.2, shape=1.0, activation=0, m_max=100),
    b_inf=BoundarySpec(scale=0.1, shape=1.0, activation=20, m_max=100),
)

COPRIMARY_DESIGN = DesignConfig(
    n_arms=1,
    theta0=22.0,
    delta=2.0,
    delta_low=1.0,
    beta0=12.49,
    delta_beta=0.0,
    endpoint=CO_PRIMARY,
    max_per_arm=250,
    max_total=250,
    b_ni=BoundarySpec(scale=0.3, m_max=250),
    b_inf=BoundarySpec(scale=0.2, shape=5.0, activation=60, m_max=250),
    b_tox=BoundarySpec(scale=0.2, shape=6.0, activation=60, m_max=250),
)

# Draw arrays built to put all mass on one side of a threshold
HIGH_THETA = np.full(1000, 23.0)
LOW_THETA = np.full(1000, 15.0)
HIGH_BETA = np.full(1000, 16.0)
LOW_BETA = np.full(1000, 10.0)


def _state(n: int, arm: int = 1, clock: float = 10.0, last=None, n_arms: int = 2):
    enrollments = [0] * n_arms
    enrollments[arm - 1] = n
    last_enrollment = [None] * n_arms
    last_enrollment[arm - 1] = last if last is not None else clock - 1
    return TrialState(
        active_arm=arm,
        clock=clock,
        enrollments=enrollments,
        total=n,
        last_enrollment=last_enrollment,
    )


# ---------------------------------------------------------------------------
# boundary_value
# ---------------------------------------------------------------------------


def test_boundary_at_cap_is_one_minus_scale():
    """At l = m_max the ratio is 1."""
    b = BoundarySpec(scale=0.3, shape=2.0, activation=10, m_max=100)
    assert boundary_value(b, 100) == pytest.approx(0.7)


def test_boundary_at_activation_is_one():
    """At l = m_j the ratio is 0."""
    b = BoundarySpec(scale=0.3, shape=2.0, activation=10, m_max=100)
    assert boundary_value(b, 10) == pytest.approx(1.0)


def test_boundary_below_activation_is_one():
    """Before activation the rule cannot fire."""
    b = BoundarySpec(scale=0.3, shape=2.0, activation=10, m_max=100)
    assert boundary_value(b, 3) == 1.0


def test_boundary_direct_arithmetic():
    """s=0.4, S=1, m=50, m_max=100, l=75 gives 0.8."""
    b = BoundarySpec(scale=0.4, shape=1.0, activation=50, m_max=100)
    assert boundary_value(b, 75) == pytest.approx(0.8)


def test_boundary_shape_zero_is_flat():
    """Shape 0 gives a constant boundary once active."""
    b = BoundarySpec(scale=0.25, shape=0.0, activation=0, m_max=100)
    assert boundary_value(b, 1) == pytest.approx(0.75)
    assert boundary_value(b, 100) == pytest.approx(0.75)


def test_boundary_out_of_range():
    """l outside 1..m_max is refused."""
    b = BoundarySpec(scale=0.3, m_max=100)
    with pytest.raises(ValueError):
        boundary_value(b, 0)
    with pytest.raises(ValueError):
        boundary_value(b, 101)


def test_boundary_uncalibrated():
    """A boundary without a scale cannot be evaluated."""
    with pytest.raises(ValueError, match="calibrated"):
        boundary_value(BoundarySpec(m_max=100), 50)


# ---------------------------------------------------------------------------
# efficacy_interim_decision
# ---------------------------------------------------------------------------


def test_efficacy_declares_ni():
    """All mass above theta0 - delta declares non-inferiority."""
    look = efficacy_interim_decision(EFFICACY_DESIGN, _state(50), HIGH_THETA)
    assert look.decision == DECLARE_NI
    assert look.prob_ni == 1.0


def test_efficacy_stops_inferior_once_active():
    """P(inferior) = 1 with n >= m_I stops the arm."""
    look = efficacy_interim_decision(EFFICACY_DESIGN, _state(50), LOW_THETA)
    assert look.decision == STOP_INFERIOR


def test_efficacy_inferiority_waits_for_activation():
    """Below m_I the inferiority boundary is 1 and cannot be crossed."""
    look = efficacy_interim_decision(EFFICACY_DESIGN, _state(10), LOW_THETA)
    assert look.b_inf == 1.0
    assert look.decision == CONTINUE


def test_efficacy_continue_when_nothing_fires():
    """Neither probability past its boundary with n < m_max continues."""
    draws = np.concatenate([HIGH_THETA[:500], LOW_THETA[:500]])
    look = efficacy_interim_decision(EFFICACY_DESIGN, _state(50), draws)
    assert look.prob_ni < look.b_ni
    assert look.prob_inferior < look.b_inf
    assert look.decision == CONTINUE


def test_efficacy_uses_arm_margin():
    """Arm 2 with delta_2 = 1 judges inferiority at theta0 - 1."""
    config = replace(EFFICACY_DESIGN, arm_margins=(2.0, 1.0))
    look = efficacy_interim_decision(config, _state(50, arm=2), np.full(1000, 20.5))
    assert look.margin == 1.0
    assert look.prob_inferior == 1.0


def test_efficacy_ni_is_strict():
    """P(NI) equal to the boundary does not declare."""
    config = replace(EFFICACY_DESIGN, b_ni=BoundarySpec(scale=0.5, shape=0.0, m_max=100))
    draws = np.concatenate([np.full(500, 23.0), np.full(500, 19.0)])
    look = efficacy_interim_decision(config, _state(50), draws)
    assert look.prob_ni == pytest.approx(0.5)
    assert look.decision != DECLARE_NI


# ---------------------------------------------------------------------------
# pause_or_continue
# ---------------------------------------------------------------------------


def test_pause_at_cap_during_follow_up():
    """At m_max with follow-up pending, accrual pauses."""
    state = _state(100, clock=20.0, last=15.0)
    assert pause_or_continue(EFFICACY_DESIGN, state) == PAUSE


def test_close_after_follow_up():
    """At m_max and t_FU after the last enrollment the arm closes."""
    state = _state(100, clock=27.0, last=15.0)
    assert pause_or_continue(EFFICACY_DESIGN, state) == CLOSE_NOT_REJECTED


def test_no_active_arm():
    """An interim without an active arm is a programming error."""
    state = _state(10)
    state.active_arm = None
    with pytest.raises(ValueError):
        pause_or_continue(EFFICACY_DESIGN, state)


# ---------------------------------------------------------------------------
# co-primary rules
# ---------------------------------------------------------------------------


def test_adaptive_margin_lenient_branch():
    """Toxicity mass entirely above beta0 keeps the margin at delta."""
    margin, _ = adaptive_margin(COPRIMARY_DESIGN, 0.0, 100)
    assert margin == COPRIMARY_DESIGN.delta


def test_adaptive_margin_strict_branch():
    """Toxicity evidence above B_T tightens the margin to delta_low."""
    margin, b_margin = adaptive_margin(COPRIMARY_DESIGN, 1.0, 250)
    assert b_margin < 1.0
    assert margin == COPRIMARY_DESIGN.delta_low


def test_coprimary_declares_ni():
    """Efficacy kept and toxicity reduced declares NI."""
    state = _state(100, n_arms=1)
    look = coprimary_interim_decision(COPRIMARY_DESIGN, state, HIGH_THETA, HIGH_BETA)
    assert look.decision == DECLARE_NI


def test_coprimary_stops_for_toxicity():
    """P(beta <= beta0 + delta_beta) = 1 past activation stops for toxicity."""
    state = _state(100, n_arms=1)
    look = coprimary_interim_decision(COPRIMARY_DESIGN, state, HIGH_THETA, LOW_BETA)
    assert look.decision == STOP_TOXICITY
    assert look.margin == COPRIMARY_DESIGN.delta_low


def test_coprimary_inferiority_uses_adaptive_margin():
    """theta just under theta0 - delta_low is inferior only under the strict branch."""
    config = replace(COPRIMARY_DESIGN, b_tox=BoundarySpec(scale=0.0, m_max=250))
    draws = np.full(1000, 20.5)
    look = coprimary_interim_decision(config, _state(200, n_arms=1), draws, LOW_BETA)
    assert look.margin == config.delta_low
    assert look.prob_inferior == 1.0
    assert look.decision == STOP_INFERIOR


def test_coprimary_needs_paired_draws():
    """Mismatched draw arrays are refused."""
    with pytest.raises(ValueError):
        coprimary_interim_decision(
            COPRIMARY_DESIGN, _state(100, n_arms=1), HIGH_THETA, HIGH_BETA[:10]
        )


def test_margin_boundary_below_toxicity_boundary_enforced():
    """B_T at or above b_T at some l is a validation error."""
    config = replace(COPRIMARY_DESIGN, b_margin=BoundarySpec(scale=0.0, m_max=250))
    with pytest.raises(DesignValidationError, match="b_margin"):
        config.check()


def test_delta_low_above_delta_rejected():
    """The adaptive margin needs delta >= delta_low."""
    with pytest.raises(DesignValidationError, match="delta_low"):
        replace(COPRIMARY_DESIGN, delta_low=3.0).check()


# ---------------------------------------------------------------------------
# monitoring_look / futility_fired
# ---------------------------------------------------------------------------


def test_monitoring_never_stops():
    """Monitoring reports the probabilities but only continues, pauses or closes."""
    look = monitoring_look(EFFICACY_DESIGN, _state(50), HIGH_THETA)
    assert look.prob_ni == 1.0
    assert look.decision == CONTINUE


def test_monitoring_omits_uncalibrated_boundaries():
    """An unset NI scale leaves b_ni empty."""
    config = replace(EFFICACY_DESIGN, b_ni=BoundarySpec(m_max=100))
    look = monitoring_look(config, _state(50), HIGH_THETA)
    assert look.b_ni is None
    assert look.b_inf is not None


def test_futility_fired_strict():
    """Futility fires on strict exceedance only."""
    look = monitoring_look(EFFICACY_DESIGN, _state(50), LOW_THETA)
    assert futility_fired(look)
    look.prob_inferior = look.b_inf
    assert not futility_fired(look)
