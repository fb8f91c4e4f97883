"""
Monte-Carlo commands for deintensify.
Provides `calibrate`, `simulate` and `samplesize`; replicate parallelism
lives in the core simulator, these commands only orchestrate and report.
"""
import argparse
import logging
import math
from pathlib import Path
from typing import List, Optional

from app.commands import EXIT_OK
from app.core import store
from app.core.calibration import (
    INTERIOR_LABEL,
    MIN_SIMULATIONS,
    CalibrationResult,
    apply_calibration,
    calibrate_design,
)
from app.core.comparators import RciDecider
from app.core.engine import BayesianDecider, patient_rows, run_trial
from app.core.models import DesignConfig, DesignValidationError
from app.core.simulator import (
    BAYESIAN,
    COMPARATOR,
    DESIGN_KINDS,
    OperatingCharacteristics,
    SampleSizeResult,
    sample_size_search,
    simulate_oc,
)
from app.core.streams import default_workers

logger = logging.getLogger(__name__)


def _workers(value: Optional[int]) -> int:
    return default_workers() if value is None else max(1, value)


def _replicates(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid replicate count '{text}'")
    if n < MIN_SIMULATIONS:
        raise argparse.ArgumentTypeError(f"need at least {MIN_SIMULATIONS} replicates, got {n}")
    return n


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------


def _format_calibration(result: CalibrationResult) -> str:
    lines = [f"Calibration (C={result.n_sims}, seed={result.seed}, alpha={result.alpha:g})"]
    lines.append(f"  {'null scenario':<28}{'s_NI,F':>10}")
    for label, scale in result.per_scenario.items():
        marker = "  <- worst case" if label == result.worst_case() else ""
        lines.append(f"  {label:<28}{scale:>10.6f}{marker}")
    lines.append(
        f"  s_NI = {result.s_ni:.6f}   s_I = {result.s_inf:.6f}   s_T = {result.s_tox:.6f}"
    )
    for rule, f in result.futility.items():
        line = f"  {rule} target {f.target:g} -> scale {f.scale:.6f}"
        if f.stop_rate is not None:
            flag = "" if f.within else "  OFF TARGET"
            line += f"   fresh stop rate {f.stop_rate:.4f} (MC SE {f.mc_se:.4f}){flag}"
        lines.append(line)
    if result.self_checks:
        lines.append("  Fresh-seed re-simulation at the calibrated s_NI:")
        lines.append(f"  {'scenario':<28}{'reject':>9}{'MC SE':>9}{'bound':>9}")
        highest = max(result.self_checks, key=lambda c: c.rejection_rate)
        for c in result.self_checks:
            flag = "" if c.within else "  ABOVE BOUND"
            if c is highest:
                flag += "  <- highest"
            lines.append(
                f"  {c.label:<28}{c.rejection_rate:>9.4f}{c.mc_se:>9.4f}{c.bound:>9.4f}{flag}"
            )
        if highest.label == INTERIOR_LABEL:
            lines.append("  Interior null is the worst case on fresh replicates")
    mc_se = math.sqrt(result.alpha * (1.0 - result.alpha) / result.n_sims)
    lines.append(f"  Monte-Carlo SE at alpha: {mc_se:.4f}")
    return "\n".join(lines)


def cmd_calibrate(args: argparse.Namespace) -> int:
    config = store.load_design(args.config).check()
    workers = _workers(args.workers)
    logger.info("Calibrating with C=%d, seed=%d, %d worker(s)", args.sims, args.seed, workers)
    result = calibrate_design(config, args.sims, args.seed, workers)
    store.save_calibration(args.out, result, config)
    print(_format_calibration(result))
    print(f"Wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _format_oc(reports: List[OperatingCharacteristics]) -> str:
    lines = []
    header = (
        f"  {'arm':>3}{'theta':>9}{'beta':>9}{'power':>9}{'futile':>9}"
        f"{'toxic':>9}{'untested':>9}{'N':>9}"
    )
    for r in reports:
        lines.append(f"Scenario '{r.label}' (C={r.n_sims})")
        lines.append(header)
        for a in r.arms:
            lines.append(
                f"  {a.arm:>3}{a.theta:>9.3f}{a.beta:>9.3f}{a.power.estimate:>9.4f}"
                f"{a.futility.estimate:>9.4f}{a.toxicity.estimate:>9.4f}"
                f"{a.not_tested.estimate:>9.4f}{a.enrollment.estimate:>9.1f}"
            )
        study = (
            f"  duration {r.duration.estimate:.2f} months, "
            f"enrollment {r.total_enrollment.estimate:.1f}"
        )
        if r.type_one_error is not None:
            study += (
                f", type I error {r.type_one_error.estimate:.4f} "
                f"(MC SE {r.type_one_error.mc_se:.4f})"
            )
        lines.append(study)
    return "\n".join(lines)


def _export_trial(args: argparse.Namespace, config: DesignConfig, scenarios) -> None:
    """One trial of the first scenario on the bare seed, so `decide --seed` replays it."""
    scenario = scenarios.scenarios[0]
    decider = RciDecider(config) if args.kind != BAYESIAN else BayesianDecider(config)
    record = run_trial(config, scenario, args.seed, decider)
    if args.export_patients:
        store.save_patients(args.export_patients, patient_rows(record), config.co_primary)
        logger.info("Exported %d patients to %s", len(record.patients), args.export_patients)
    if args.export_record:
        store.save_trial_record(args.export_record, record)


def cmd_simulate(args: argparse.Namespace) -> int:
    config = store.load_design(args.config).check()
    digest = store.design_digest(config)
    if args.kind == COMPARATOR and config.comparator is None:
        raise DesignValidationError(["comparator: required for --kind comparator"])
    if args.calib:
        calibration = store.load_calibration(args.calib)
        store.check_calibration(config, calibration)
        config = apply_calibration(config, calibration).check()
    scenarios = store.load_scenarios(args.scenarios, config)

    workers = _workers(args.workers)
    logger.info(
        "Simulating %d scenario(s) x %d replicates on %d worker(s)",
        len(scenarios), args.sims, workers,
    )
    reports = simulate_oc(config, scenarios, args.sims, args.seed, workers, kind=args.kind)

    out = Path(args.out)
    csv_path = Path(args.csv) if args.csv else out.with_suffix(".csv")
    store.save_oc(out, csv_path, reports, digest, args.kind)
    print(_format_oc(reports))
    print(f"Wrote {out} and {csv_path}")

    if args.export_patients or args.export_record:
        _export_trial(args, config, scenarios)
    return EXIT_OK


# ---------------------------------------------------------------------------
# samplesize
# ---------------------------------------------------------------------------


def parse_grid(text: str) -> List[int]:
    """Comma-separated m_max values, or start:stop:step (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (int(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError
            grid = list(range(start, stop + 1, step))
        else:
            grid = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid m_max grid '{text}'")
    if not grid or grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise argparse.ArgumentTypeError(
            f"m_max grid '{text}' must be positive and strictly ascending"
        )
    return grid


def _format_curve(result: SampleSizeResult) -> str:
    lines = [f"  {'m_max':>6}{'power':>9}{'MC SE':>9}{'s_NI':>10}"]
    for p in result.curve:
        lines.append(f"  {p.m_max:>6}{p.power:>9.4f}{p.mc_se:>9.4f}{p.s_ni:>10.6f}")
    if result.reached:
        lines.append(f"Recommended m_max = {result.recommended} (target power {result.target:g})")
    else:
        lines.append(f"Target power {result.target:g} not reached on this grid")
    return "\n".join(lines)


def cmd_samplesize(args: argparse.Namespace) -> int:
    config = store.load_design(args.config).check()
    scenarios = store.load_scenarios(args.scenario, config)
    index = 0
    if args.label is not None:
        labels = [s.label for s in scenarios.scenarios]
        if args.label not in labels:
            raise store.DataFileError(f"no scenario labelled '{args.label}'", args.scenario)
        index = labels.index(args.label)

    result = sample_size_search(
        config,
        scenarios.scenarios[index],
        args.target_power,
        args.grid,
        args.sims,
        args.seed,
        _workers(args.workers),
    )
    if args.out:
        store.save_power_curve(args.out, result, store.design_digest(config), args.seed)
    print(_format_curve(result))
    return EXIT_OK


def register(subparsers) -> None:
    """Add the calibrate, simulate and samplesize subcommands."""
    p = subparsers.add_parser("calibrate", help="calibrate the boundary scales")
    p.add_argument("--config", required=True, help="design JSON")
    p.add_argument(
        "--sims", type=_replicates, default=2000, help="simulations per null scenario (C)"
    )
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, help="worker processes (default DEINTENSIFY_WORKERS)")
    p.add_argument("--out", required=True, help="calibration JSON to write")
    p.set_defaults(handler=cmd_calibrate)

    p = subparsers.add_parser("simulate", help="operating characteristics by simulation")
    p.add_argument("--config", required=True, help="design JSON")
    p.add_argument("--calib", help="calibration JSON (required for Bayesian designs)")
    p.add_argument("--scenarios", required=True, help="scenario JSON")
    p.add_argument("--sims", type=_replicates, default=2000, help="replicates per scenario")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, help="worker processes (default DEINTENSIFY_WORKERS)")
    p.add_argument("--kind", choices=DESIGN_KINDS, default=BAYESIAN)
    p.add_argument("--out", required=True, help="OC report JSON")
    p.add_argument("--csv", help="flat OC CSV (default: next to --out)")
    p.add_argument("--export-patients", help="patient CSV of one trial of the first scenario")
    p.add_argument("--export-record", help="per-arm CSV of that trial")
    p.set_defaults(handler=cmd_simulate)

    p = subparsers.add_parser("samplesize", help="smallest m_max reaching a target power")
    p.add_argument("--config", required=True, help="design JSON")
    p.add_argument("--scenario", required=True, help="scenario JSON")
    p.add_argument("--label", help="scenario label (default: the first)")
    p.add_argument("--target-power", type=float, required=True)
    p.add_argument("--grid", type=parse_grid, required=True, help="e.g. 60,80,100 or 60:120:20")
    p.add_argument("--sims", type=_replicates, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, help="worker processes (default DEINTENSIFY_WORKERS)")
    p.add_argument("--out", help="power-curve CSV")
    p.set_defaults(handler=cmd_samplesize)
