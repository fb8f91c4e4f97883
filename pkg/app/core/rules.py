"""
Decision boundaries and interim decision rules for de-intensification designs.
Pure functions with no I/O or random state for easy testing: the posterior
arrives as arrays of draws, the verdict leaves as an InterimLook.
"""
import numpy as np

from .models import (
    CLOSE_NOT_REJECTED,
    CONTINUE,
    DECLARE_NI,
    PAUSE,
    STOP_INFERIOR,
    STOP_TOXICITY,
    BoundarySpec,
    DesignConfig,
    InterimLook,
    TrialState,
)

# Slack for clock arithmetic on month grids
CLOCK_EPS = 1e-9


def boundary_value(b: BoundarySpec, ell: int) -> float:
    """b(l) = 1 - s * max[0, (l - m)/(m_max - m)] ** S for l in 1..m_max.

    Returns 1 below the activation count (rule inactive).
    """
    if not 1 <= ell <= b.m_max:
        raise ValueError(f"enrollment count {ell} outside 1..{b.m_max}")
    if b.scale is None:
        raise ValueError("boundary scale has not been calibrated")
    if ell < b.activation:
        return 1.0
    if b.m_max == b.activation:
        ratio = 1.0
    else:
        ratio = max(0.0, (ell - b.activation) / (b.m_max - b.activation))
    return 1.0 - b.scale * ratio ** b.shape


def _arm_counts(config: DesignConfig, state: TrialState):
    arm = state.active_arm
    if arm is None or not 1 <= arm <= config.n_arms:
        raise ValueError(f"no active arm to analyse (active_arm={arm})")
    n_arm = state.enrollments[arm - 1]
    if not 1 <= n_arm <= config.max_per_arm:
        raise ValueError(f"arm {arm} has {n_arm} enrollments; expected 1..{config.max_per_arm}")
    return arm, n_arm


def pause_or_continue(config: DesignConfig, state: TrialState) -> str:
    """Resolve an interim where no stopping rule fired."""
    arm, n_arm = _arm_counts(config, state)
    if n_arm < config.max_per_arm:
        return CONTINUE
    last = state.last_enrollment[arm - 1]
    if last is not None and state.clock - last >= config.follow_up - CLOCK_EPS:
        return CLOSE_NOT_REJECTED
    return PAUSE


def efficacy_interim_decision(
    config: DesignConfig, state: TrialState, thetas: np.ndarray
) -> InterimLook:
    """Apply the efficacy-only rules to posterior RMST draws of the active arm.

    Non-inferiority is checked first:
        declare-NI     iff P(theta > theta0 - delta)   >  b_NI(n)
        stop-inferior  iff P(theta <= theta0 - delta_k) > b_I(n)
    """
    arm, n_arm = _arm_counts(config, state)
    thetas = np.asarray(thetas, dtype=float)
    margin = config.margin_for(arm)

    prob_ni = float(np.mean(thetas > config.theta0 - config.delta))
    prob_inferior = float(np.mean(thetas <= config.theta0 - margin))
    b_ni = boundary_value(config.b_ni, n_arm)
    b_inf = boundary_value(config.b_inf, n_arm)

    if prob_ni > b_ni:
        decision = DECLARE_NI
    elif prob_inferior > b_inf:
        decision = STOP_INFERIOR
    else:
        decision = pause_or_continue(config, state)

    return InterimLook(
        clock=state.clock,
        arm=arm,
        n_arm=n_arm,
        decision=decision,
        prob_ni=prob_ni,
        prob_inferior=prob_inferior,
        margin=margin,
        b_ni=b_ni,
        b_inf=b_inf,
    )


def adaptive_margin(config: DesignConfig, prob_toxicity: float, n_arm: int):
    """delta_k(Sigma_t): delta while toxicity evidence stays at or below B_T, else delta_low."""
    b_margin = boundary_value(config.margin_boundary(), n_arm)
    if prob_toxicity <= b_margin:
        return config.delta, b_margin
    return config.delta_low, b_margin


def coprimary_interim_decision(
    config: DesignConfig, state: TrialState, thetas: np.ndarray, betas: np.ndarray
) -> InterimLook:
    """Apply the co-primary rules to paired posterior draws (theta_k, beta_k).

        declare-NI     iff P(theta > theta0 - delta, beta > beta0) >= b_NI(n)
        stop-toxicity  iff P(beta <= beta0 + delta_beta)           >  b_T(n)
        stop-inferior  iff P(theta <= theta0 - delta_k(Sigma_t))    >  b_I(n)
    """
    arm, n_arm = _arm_counts(config, state)
    thetas = np.asarray(thetas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if thetas.shape != betas.shape:
        raise ValueError("efficacy and toxicity draws must be paired")

    prob_toxicity = float(np.mean(betas <= config.beta0 + config.delta_beta))
    margin, b_margin = adaptive_margin(config, prob_toxicity, n_arm)
    prob_inferior = float(np.mean(thetas <= config.theta0 - margin))
    prob_ni = float(np.mean((thetas > config.theta0 - config.delta) & (betas > config.beta0)))

    b_ni = boundary_value(config.b_ni, n_arm)
    b_tox = boundary_value(config.b_tox, n_arm)
    b_inf = boundary_value(config.b_inf, n_arm)

    if prob_ni >= b_ni:
        decision = DECLARE_NI
    elif prob_toxicity > b_tox:
        decision = STOP_TOXICITY
    elif prob_inferior > b_inf:
        decision = STOP_INFERIOR
    else:
        decision = pause_or_continue(config, state)

    return InterimLook(
        clock=state.clock,
        arm=arm,
        n_arm=n_arm,
        decision=decision,
        prob_ni=prob_ni,
        prob_inferior=prob_inferior,
        prob_toxicity=prob_toxicity,
        margin=margin,
        b_ni=b_ni,
        b_inf=b_inf,
        b_tox=b_tox,
        b_margin=b_margin,
    )


# ---------------------------------------------------------------------------
# Monitoring without stopping (calibration traces)
# ---------------------------------------------------------------------------


def _maybe_boundary(b: BoundarySpec, ell: int):
    return boundary_value(b, ell) if b.calibrated else None


def monitoring_look(
    config: DesignConfig, state: TrialState, thetas: np.ndarray, betas=None
) -> InterimLook:
    """Every posterior probability the rules would use, with no rule allowed to stop.

    Boundaries appear only once their scale is known; the decision is
    continue, pause or close-not-rejected.
    """
    arm, n_arm = _arm_counts(config, state)
    thetas = np.asarray(thetas, dtype=float)
    look = InterimLook(clock=state.clock, arm=arm, n_arm=n_arm)

    if config.co_primary:
        betas = np.asarray(betas, dtype=float)
        look.prob_toxicity = float(np.mean(betas <= config.beta0 + config.delta_beta))
        look.margin, look.b_margin = adaptive_margin(config, look.prob_toxicity, n_arm)
        look.prob_ni = float(
            np.mean((thetas > config.theta0 - config.delta) & (betas > config.beta0))
        )
        look.b_tox = _maybe_boundary(config.b_tox, n_arm)
    else:
        look.margin = config.margin_for(arm)
        look.prob_ni = float(np.mean(thetas > config.theta0 - config.delta))

    look.prob_inferior = float(np.mean(thetas <= config.theta0 - look.margin))
    look.b_ni = _maybe_boundary(config.b_ni, n_arm)
    look.b_inf = _maybe_boundary(config.b_inf, n_arm)
    look.decision = pause_or_continue(config, state)
    return look


def futility_fired(look: InterimLook) -> bool:
    """True when an inferiority or toxicity boundary was crossed at this look."""
    if look.b_inf is not None and look.prob_inferior is not None:
        if look.prob_inferior > look.b_inf:
            return True
    if look.b_tox is not None and look.prob_toxicity is not None:
        if look.prob_toxicity > look.b_tox:
            return True
    return False
