"""
Design commands for deintensify.
Provides `validate` for design documents and `decide` for one interim
analysis of real (or exported) patient data.
"""
import argparse
import logging
import re
from pathlib import Path
from typing import List, Optional

from app.commands import EXIT_INVALID, EXIT_OK, decision_exit_code
from app.core import store
from app.core.calibration import apply_calibration
from app.core.comparators import RciDecider
from app.core.engine import BayesianDecider, clock_index, replay_interim, state_at
from app.core.models import CONTINUE, DesignConfig, DesignValidationError, InterimLook
from app.core.simulator import BAYESIAN, COMPARATOR, require_calibrated
from app.core.streams import interim_rng

logger = logging.getLogger(__name__)

_KEY = re.compile(r"[A-Za-z_]+")


def _addressed(violations: List[str], text: str) -> List[str]:
    """Prefix each violation with the line of the key it names, when found."""
    lines = []
    for v in violations:
        match = _KEY.match(v)
        line = store.key_line(text, match.group()) if match else None
        lines.append(f"line {line}: {v}" if line else v)
    return lines


def _calibrated(config: DesignConfig, calib: Optional[str]) -> DesignConfig:
    if calib is None:
        return config
    calibration = store.load_calibration(calib)
    store.check_calibration(config, calibration)
    return apply_calibration(config, calibration)


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def _format_design(config: DesignConfig, digest: str) -> str:
    lines = [
        f"Design OK  ({config.n_arms} arm(s), endpoint {config.endpoint})",
        f"  theta0={config.theta0:g}  delta={config.delta:g}  horizon={config.horizon:g}",
        f"  m_max={config.max_per_arm}  n={config.max_total}  follow-up={config.follow_up:g}",
    ]
    if config.co_primary:
        lines.append(
            f"  beta0={config.beta0:g}  delta_beta={config.delta_beta:g}  "
            f"delta_low={config.delta_low:g}"
        )
    for name in ("b_ni", "b_inf", "b_tox"):
        b = getattr(config, name)
        scale = "uncalibrated" if b.scale is None else f"{b.scale:.6g}"
        lines.append(f"  {name}: scale {scale}, shape {b.shape:g}, activation {b.activation}")
    lines.append(f"  digest {digest}")
    return "\n".join(lines)


def cmd_validate(args: argparse.Namespace) -> int:
    path = Path(args.config)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise store.DataFileError(str(exc), path) from exc

    try:
        config = store.load_design(path)
        digest = store.design_digest(config)
        config = _calibrated(config, args.calib).check()
    except DesignValidationError as exc:
        print(f"{path}: {len(exc.violations)} problem(s)")
        for line in _addressed(exc.violations, text):
            print(f"  {line}")
        return EXIT_INVALID

    print(_format_design(config, digest))
    return EXIT_OK


# ---------------------------------------------------------------------------
# decide
# ---------------------------------------------------------------------------


def _row(label: str, value: Optional[float], boundary: Optional[float], op: str) -> str:
    if value is None:
        return ""
    text = f"  {label:<14}{value:.4f}"
    if boundary is not None:
        text += f"   fires if {op} {boundary:.4f}"
    return text


def _format_look(config: DesignConfig, look: InterimLook) -> str:
    lines = [f"Interim at month {look.clock:g}: arm {look.arm}, n={look.n_arm}"]
    ni_op = ">=" if config.co_primary else ">"
    rows = [
        _row("P(NI)", look.prob_ni, look.b_ni, ni_op),
        _row("P(toxicity)", look.prob_toxicity, look.b_tox, ">"),
        _row("P(inferior)", look.prob_inferior, look.b_inf, ">"),
    ]
    lines.extend(r for r in rows if r)
    if config.co_primary and look.margin is not None:
        branch = "delta" if look.margin == config.delta else "delta_low"
        lines.append(
            f"  margin        {look.margin:g} ({branch}; B_T={look.b_margin:.4f})"
        )
    elif look.margin is not None:
        lines.append(f"  margin        {look.margin:g}")
    if look.estimate is not None:
        lines.append(
            f"  RMST          {look.estimate:.4f} (SE {look.std_error:.4f}, lower {look.lower})"
        )
    lines.append(f"Decision: {look.decision}")
    return "\n".join(lines)


def cmd_decide(args: argparse.Namespace) -> int:
    config = store.load_design(args.config).check()
    if args.kind == COMPARATOR:
        if config.comparator is None:
            raise DesignValidationError(["comparator: required for --kind comparator"])
        decider = RciDecider(config)
    else:
        config = _calibrated(config, args.calib)
        require_calibrated(config, BAYESIAN)
        decider = BayesianDecider(config)
    config.check()

    patients = store.load_patients(args.data, config, clock=args.time)
    if patients:
        first = min(p.enroll_time for p in patients)
        if args.time < first:
            raise store.DataFileError(
                f"analysis month {args.time:g} precedes the first enrollment ({first:g})",
                args.data,
            )

    look = replay_interim(config, patients, args.time, args.seed, decider)
    if look is None:
        print(f"No data on the active arm at month {args.time:g}")
        print(f"Decision: {CONTINUE}")
        return EXIT_OK

    print(_format_look(config, look))
    if args.draws and isinstance(decider, BayesianDecider):
        state = state_at(config, patients, args.time)
        rng = interim_rng(args.seed, clock_index(config, args.time))
        thetas, _ = decider.draws(state, rng)
        store.save_draws(args.draws, {look.arm: thetas})
        logger.info("Wrote %d posterior draws to %s", len(thetas), args.draws)
    return decision_exit_code(look.decision)


def register(subparsers) -> None:
    """Add the validate and decide subcommands."""
    p = subparsers.add_parser("validate", help="check a design document")
    p.add_argument("--config", required=True, help="design JSON")
    p.add_argument("--calib", help="calibration JSON to apply before checking")
    p.set_defaults(handler=cmd_validate)

    p = subparsers.add_parser("decide", help="interim decision on patient data")
    p.add_argument("--config", required=True, help="design JSON")
    p.add_argument("--calib", help="calibration JSON (Bayesian designs)")
    p.add_argument("--data", required=True, help="patient CSV")
    p.add_argument("--time", required=True, type=float, help="analysis month t")
    p.add_argument("--seed", type=int, default=0, help="seed of the posterior draws")
    p.add_argument("--kind", choices=(BAYESIAN, COMPARATOR), default=BAYESIAN)
    p.add_argument("--draws", help="write the active arm's posterior RMST draws here")
    p.set_defaults(handler=cmd_decide)
