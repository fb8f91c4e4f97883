"""
File store for deintensify.
Handles all file I/O: design documents, distribution specs, digitized
curves, scenario sets, calibration files, patient data and reports.
"""
import hashlib
import json
import logging
import math
import re
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .. import __version__
from .calibration import CalibrationResult, FutilityCalibration, SelfCheck
from .models import (
    ArmScenario,
    BoundarySpec,
    DesignConfig,
    DesignValidationError,
    PatientRecord,
    PriorSpec,
    RciDesignConfig,
    Scenario,
    SpendingFunction,
    TrialRecord,
)
from .simulator import OperatingCharacteristics, SampleSizeResult, ScenarioSet
from .survival import (
    ExponentialDistribution,
    NoEventDistribution,
    PiecewiseDistribution,
    ScenarioDistribution,
    TargetUnreachableError,
    TransformedDistribution,
    TransformKind,
    apply_transform,
    exponential_with_rmst,
    solve_transform_to_rmst,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CURVE_COLUMNS = ["time_months", "survival"]
PATIENT_COLUMNS = ["arm", "enroll_month", "pfs_months", "pfs_event"]
AE_COLUMNS = ["ae_months", "ae_event"]
DRAW_COLUMNS = ["draw_id", "arm", "rmst"]
OC_COLUMNS = ["scenario", "arm", "metric", "estimate", "mc_se"]
POWER_COLUMNS = ["m_max", "power", "mc_se", "s_ni", "target", "seed", "digest", "version"]
ARM_METRICS = ("power", "futility", "toxicity", "not_tested", "not_rejected", "enrollment")


class DataFileError(ValueError):
    """A data file failed to parse; carries the offending row when known."""

    def __init__(self, message: str, path: Optional[PathLike] = None, row: Optional[int] = None):
        self.path = None if path is None else str(path)
        self.row = row
        where = self.path or "input"
        if row is not None:
            where = f"{where}, row {row}"
        super().__init__(f"{where}: {message}")


class CalibrationMismatchError(ValueError):
    """The calibration file was produced for a different design."""


# ---------------------------------------------------------------------------
# Distribution specs
# ---------------------------------------------------------------------------


def _number(spec: Mapping, key: str, where: str) -> float:
    value = spec.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DesignValidationError([f"{where}.{key}: expected a number, got {value!r}"])
    return float(value)


def distribution_from_spec(
    spec: Any, horizon: float, where: str, base_dir: Optional[Path] = None
) -> ScenarioDistribution:
    """Build a survival law from its JSON spec; errors name the spec's key path."""
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise DesignValidationError([f"{where}: expected an object with a 'kind'"])
    kind = spec["kind"]
    try:
        if kind == "exponential":
            if "rate" in spec:
                return ExponentialDistribution(_number(spec, "rate", where))
            return exponential_with_rmst(_number(spec, "rmst", where), horizon)
        if kind == "no-event":
            return NoEventDistribution()
        if kind == "piecewise":
            tail = spec.get("tail", "exponential")
            if "csv" in spec:
                path = Path(spec["csv"])
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                return load_curve_csv(path, tail=tail)
            return PiecewiseDistribution.from_knots(spec["knots"], tail=tail)
        if kind == "transformed":
            base = distribution_from_spec(spec.get("base"), horizon, f"{where}.base", base_dir)
            transform = spec.get("transform")
            if "target_rmst" in spec:
                target = _number(spec, "target_rmst", where)
                tk = solve_transform_to_rmst(base, transform, target, horizon)
            else:
                tk = TransformKind(transform, _number(spec, "parameter", where))
            return apply_transform(base, tk)
    except DesignValidationError:
        raise
    except (TargetUnreachableError, DataFileError) as exc:
        raise DesignValidationError([f"{where}: {exc}"]) from exc
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DesignValidationError([f"{where}: invalid {kind} spec ({exc})"]) from exc
    raise DesignValidationError([f"{where}.kind: unknown distribution kind {kind!r}"])


def distribution_to_spec(dist: ScenarioDistribution) -> Dict[str, Any]:
    if isinstance(dist, ExponentialDistribution):
        return {"kind": "exponential", "rate": dist.rate}
    if isinstance(dist, NoEventDistribution):
        return {"kind": "no-event"}
    if isinstance(dist, PiecewiseDistribution):
        knots = [[t, s] for t, s in zip(dist.times, dist.values)]
        return {"kind": "piecewise", "knots": knots, "tail": dist.tail}
    if isinstance(dist, TransformedDistribution):
        return {
            "kind": "transformed",
            "base": distribution_to_spec(dist.base),
            "transform": dist.transform.kind,
            "parameter": dist.transform.parameter,
        }
    raise TypeError(f"no spec form for {type(dist).__name__}")


def load_curve_csv(path: PathLike, tail: str = "exponential") -> PiecewiseDistribution:
    """Digitized curve with header time_months,survival and first row 0,1.0."""
    try:
        df = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataFileError(str(exc), path) from exc
    if list(df.columns) != CURVE_COLUMNS:
        raise DataFileError(f"header must be {','.join(CURVE_COLUMNS)}", path, row=0)
    if df.empty:
        raise DataFileError("no knots", path)

    times, values = [], []
    for i, (t_raw, s_raw) in enumerate(df.itertuples(index=False), start=1):
        try:
            t, s = float(t_raw), float(s_raw)
        except (TypeError, ValueError):
            raise DataFileError(f"non-numeric value ({t_raw!r}, {s_raw!r})", path, row=i)
        if i == 1 and (t != 0.0 or s != 1.0):
            raise DataFileError("first knot must be 0,1.0", path, row=i)
        if i > 1 and not t > times[-1]:
            raise DataFileError("times must be strictly increasing", path, row=i)
        if not 0.0 <= s <= 1.0:
            raise DataFileError("survival must lie in [0, 1]", path, row=i)
        if i > 1 and s > values[-1]:
            raise DataFileError("survival must be non-increasing", path, row=i)
        times.append(t)
        values.append(s)
    if len(times) < 2:
        raise DataFileError("a curve needs at least two knots", path)
    return PiecewiseDistribution(tuple(times), tuple(values), tail=tail)


# ---------------------------------------------------------------------------
# Design documents
# ---------------------------------------------------------------------------

_SCALARS = {
    "n_arms": int,
    "theta0": float,
    "delta": float,
    "horizon": float,
    "delta_low": float,
    "beta0": float,
    "delta_beta": float,
    "max_total": int,
    "max_per_arm": int,
    "follow_up": float,
    "accrual_rate": float,
    "accrual": str,
    "interim_period": float,
    "alpha": float,
    "endpoint": str,
    "monotone_efficacy": bool,
    "monotone_toxicity": bool,
    "p_inferior": float,
    "p_toxicity": float,
    "posterior_draws": int,
    "proposal_budget": int,
    "grid_step": float,
    "grid_horizon": float,
}
_BOUNDARIES = ("b_ni", "b_inf", "b_tox", "b_margin")
_PRIORS = ("efficacy_prior", "toxicity_prior")
_HISTORICAL = ("historical_efficacy", "historical_toxicity")
KNOWN_KEYS = set(_SCALARS) | set(_BOUNDARIES) | set(_PRIORS) | set(_HISTORICAL) | {
    "arm_margins",
    "comparator",
}


def _cast(value: Any, kind: type, key: str) -> Any:
    if value is None and key in ("delta_low", "beta0"):
        return None
    if kind is bool:
        if isinstance(value, bool):
            return value
    elif kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    elif kind is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif kind is str:
        if isinstance(value, str):
            return value
    raise TypeError(f"{key}: expected {kind.__name__}, got {value!r}")


def _boundary(doc: Any, name: str, m_max: int, default: BoundarySpec) -> BoundarySpec:
    if doc is None:
        return replace(default, m_max=m_max)
    if not isinstance(doc, Mapping):
        raise DesignValidationError([f"{name}: expected an object"])
    unknown = set(doc) - {"scale", "shape", "activation"}
    if unknown:
        raise DesignValidationError([f"{name}.{k}: unknown key" for k in sorted(unknown)])
    scale = doc.get("scale", default.scale)
    try:
        return BoundarySpec(
            scale=None if scale is None else _cast(scale, float, f"{name}.scale"),
            shape=_cast(doc.get("shape", default.shape), float, f"{name}.shape"),
            activation=_cast(doc.get("activation", default.activation), int, f"{name}.activation"),
            m_max=m_max,
        )
    except TypeError as exc:
        raise DesignValidationError([str(exc)]) from exc


def _spending(doc: Any, where: str, default: SpendingFunction) -> SpendingFunction:
    if doc is None:
        return default
    if not isinstance(doc, Mapping):
        raise DesignValidationError([f"{where}: expected an object"])
    try:
        return SpendingFunction(
            kind=_cast(doc.get("kind", default.kind), str, f"{where}.kind"),
            alpha=_cast(doc.get("alpha", default.alpha), float, f"{where}.alpha"),
        )
    except TypeError as exc:
        raise DesignValidationError([str(exc)]) from exc


def _comparator(doc: Any) -> RciDesignConfig:
    if not isinstance(doc, Mapping):
        raise DesignValidationError(["comparator: expected an object"])
    base = RciDesignConfig()
    known = {"ni_spending", "futility", "futility_spending", "min_enrollment", "bootstrap"}
    unknown = set(doc) - known
    if unknown:
        raise DesignValidationError([f"comparator.{k}: unknown key" for k in sorted(unknown)])
    try:
        return RciDesignConfig(
            ni_spending=_spending(
                doc.get("ni_spending"), "comparator.ni_spending", base.ni_spending
            ),
            futility=_cast(doc.get("futility", base.futility), str, "comparator.futility"),
            futility_spending=_spending(
                doc.get("futility_spending"), "comparator.futility_spending", base.futility_spending
            ),
            min_enrollment=_cast(
                doc.get("min_enrollment", base.min_enrollment), int, "comparator.min_enrollment"
            ),
            bootstrap=_cast(doc.get("bootstrap", base.bootstrap), int, "comparator.bootstrap"),
        )
    except TypeError as exc:
        raise DesignValidationError([str(exc)]) from exc


def design_from_document(doc: Any, base_dir: Optional[Path] = None) -> DesignConfig:
    """DesignConfig from a parsed design document; collects every problem before raising."""
    if not isinstance(doc, Mapping):
        raise DesignValidationError(["design document must be a JSON object"])
    problems = [f"{k}: unknown key" for k in sorted(set(doc) - KNOWN_KEYS)]
    kwargs: Dict[str, Any] = {}

    for key, kind in _SCALARS.items():
        if key in doc:
            try:
                kwargs[key] = _cast(doc[key], kind, key)
            except TypeError as exc:
                problems.append(str(exc))

    n_arms = kwargs.get("n_arms", DesignConfig.n_arms)
    m_max = kwargs.get("max_per_arm", DesignConfig.max_per_arm)
    horizon = kwargs.get("horizon", DesignConfig.horizon)
    kwargs.setdefault("max_total", n_arms * m_max)

    if doc.get("arm_margins") is not None:
        margins = doc["arm_margins"]
        if isinstance(margins, (int, float)) and not isinstance(margins, bool):
            kwargs["arm_margins"] = tuple([float(margins)] * n_arms)
        elif isinstance(margins, list) and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in margins
        ):
            kwargs["arm_margins"] = tuple(float(x) for x in margins)
        else:
            problems.append("arm_margins: expected a number or a list of numbers")

    defaults = {
        "b_ni": BoundarySpec(),
        "b_inf": BoundarySpec(scale=0.0),
        "b_tox": BoundarySpec(scale=0.0),
    }
    for name in _BOUNDARIES:
        try:
            if name == "b_margin":
                if doc.get(name) is not None:
                    kwargs[name] = _boundary(doc[name], name, m_max, BoundarySpec())
            else:
                kwargs[name] = _boundary(doc.get(name), name, m_max, defaults[name])
        except DesignValidationError as exc:
            problems.extend(exc.violations)

    for name in _PRIORS:
        prior = doc.get(name)
        if prior is None:
            continue
        try:
            if not isinstance(prior, Mapping) or "center" not in prior:
                raise DesignValidationError([f"{name}: expected an object with a 'center'"])
            center = distribution_from_spec(prior["center"], horizon, f"{name}.center", base_dir)
            weight = _cast(prior.get("weight", 10.0), float, f"{name}.weight")
            kwargs[name] = PriorSpec(center, weight)
        except DesignValidationError as exc:
            problems.extend(exc.violations)
        except TypeError as exc:
            problems.append(str(exc))

    for name in _HISTORICAL:
        if doc.get(name) is None:
            continue
        try:
            kwargs[name] = distribution_from_spec(doc[name], horizon, name, base_dir)
        except DesignValidationError as exc:
            problems.extend(exc.violations)

    if doc.get("comparator") is not None:
        try:
            kwargs["comparator"] = _comparator(doc["comparator"])
        except DesignValidationError as exc:
            problems.extend(exc.violations)

    if problems:
        raise DesignValidationError(problems)
    return DesignConfig(**kwargs)


def _read_json(path: PathLike) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFileError(str(exc), path) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFileError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}", path) from exc


def load_design(path: PathLike) -> DesignConfig:
    """Parse a design document (invariants are checked separately with config.check())."""
    path = Path(path)
    return design_from_document(_read_json(path), base_dir=path.parent)


def key_line(text: str, key: str) -> Optional[int]:
    """Line number of the first `"key":` in a JSON text."""
    match = re.search(rf'"{re.escape(key)}"\s*:', text)
    if match is None:
        return None
    return text.count("\n", 0, match.start()) + 1


def _boundary_doc(b: Optional[BoundarySpec]) -> Optional[Dict[str, Any]]:
    if b is None:
        return None
    return {"scale": b.scale, "shape": b.shape, "activation": b.activation}


def design_to_document(config: DesignConfig) -> Dict[str, Any]:
    """Canonical document of a design: every field explicit, laws as specs."""
    doc: Dict[str, Any] = {key: getattr(config, key) for key in _SCALARS}
    doc["arm_margins"] = None if config.arm_margins is None else list(config.arm_margins)
    for name in _BOUNDARIES:
        doc[name] = _boundary_doc(getattr(config, name))
    for name in _PRIORS:
        prior = getattr(config, name)
        doc[name] = None if prior is None else {
            "center": distribution_to_spec(prior.center),
            "weight": prior.weight,
        }
    for name in _HISTORICAL:
        dist = getattr(config, name)
        doc[name] = None if dist is None else distribution_to_spec(dist)
    doc["comparator"] = None if config.comparator is None else asdict(config.comparator)
    return doc


def design_digest(config: DesignConfig) -> str:
    """SHA-256 of the canonical design with every boundary scale nulled."""
    doc = design_to_document(config)
    for name in _BOUNDARIES:
        if doc[name] is not None:
            doc[name]["scale"] = None
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_json(path: PathLike, doc: Any) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def save_design(path: PathLike, config: DesignConfig) -> None:
    _write_json(path, design_to_document(config))


# ---------------------------------------------------------------------------
# Scenario sets
# ---------------------------------------------------------------------------


def load_scenarios(path: PathLike, config: DesignConfig) -> ScenarioSet:
    """Scenario file: a list of {label, arms: [{efficacy, toxicity?, theta?, beta?}]}."""
    path = Path(path)
    doc = _read_json(path)
    if not isinstance(doc, list) or not doc:
        raise DataFileError("expected a non-empty list of scenarios", path)

    scenarios = []
    declared = []
    for i, entry in enumerate(doc):
        where = f"scenarios[{i}]"
        if not isinstance(entry, Mapping) or "arms" not in entry:
            raise DataFileError(f"{where}: expected an object with 'arms'", path)
        label = str(entry.get("label", f"scenario-{i + 1}"))
        arms_doc = entry["arms"]
        if not isinstance(arms_doc, list) or len(arms_doc) != config.n_arms:
            raise DataFileError(f"{where}.arms: expected {config.n_arms} arms", path)
        arms = []
        for k, arm in enumerate(arms_doc, start=1):
            try:
                efficacy = distribution_from_spec(
                    arm.get("efficacy"), config.horizon, f"{where}.arms[{k}].efficacy", path.parent
                )
                toxicity = NoEventDistribution()
                if arm.get("toxicity") is not None:
                    toxicity = distribution_from_spec(
                        arm["toxicity"], config.horizon, f"{where}.arms[{k}].toxicity", path.parent
                    )
            except DesignValidationError as exc:
                raise DataFileError("; ".join(exc.violations), path) from exc
            arms.append(ArmScenario(efficacy, toxicity))
            declared.append((i, k, arm.get("theta"), arm.get("beta")))
        scenarios.append(Scenario(label, tuple(arms)))

    try:
        scenario_set = ScenarioSet(scenarios, config.horizon)
        for i, k, theta, beta in declared:
            scenario_set.check_declared(i, k, theta, beta)
    except ValueError as exc:
        raise DataFileError(str(exc), path) from exc
    return scenario_set


# ---------------------------------------------------------------------------
# Calibration files
# ---------------------------------------------------------------------------


def _finite_or_none(values: Sequence[float]) -> List[Optional[float]]:
    return [float(v) if math.isfinite(v) else None for v in values]


def _none_to_inf(values: Sequence[Optional[float]]) -> List[float]:
    return [math.inf if v is None else float(v) for v in values]


def calibration_to_document(result: CalibrationResult) -> Dict[str, Any]:
    return {
        "version": result.version,
        "digest": result.digest,
        "seed": result.seed,
        "n_sims": result.n_sims,
        "alpha": result.alpha,
        "scales": {"s_ni": result.s_ni, "s_inf": result.s_inf, "s_tox": result.s_tox},
        "per_scenario": dict(result.per_scenario),
        "critical_scales": {
            label: _finite_or_none(values) for label, values in result.critical_scales.items()
        },
        "futility": {
            rule: {
                "target": f.target,
                "scale": f.scale,
                "critical_scales": _finite_or_none(f.critical_scales),
                "stop_rate": f.stop_rate,
                "mc_se": f.mc_se,
            }
            for rule, f in result.futility.items()
        },
        "self_checks": [
            {
                "label": c.label,
                "rejection_rate": c.rejection_rate,
                "mc_se": c.mc_se,
                "bound": c.bound,
                "within": c.within,
            }
            for c in result.self_checks
        ],
    }


def save_calibration(path: PathLike, result: CalibrationResult, config: DesignConfig) -> None:
    """Write the calibration with the design digest it belongs to."""
    result.digest = design_digest(config)
    _write_json(path, calibration_to_document(result))


def load_calibration(path: PathLike) -> CalibrationResult:
    path = Path(path)
    doc = _read_json(path)
    try:
        scales = doc["scales"]
        return CalibrationResult(
            s_ni=float(scales["s_ni"]),
            s_inf=float(scales["s_inf"]),
            s_tox=float(scales["s_tox"]),
            per_scenario={k: float(v) for k, v in doc["per_scenario"].items()},
            critical_scales={k: _none_to_inf(v) for k, v in doc["critical_scales"].items()},
            n_sims=int(doc["n_sims"]),
            seed=int(doc["seed"]),
            alpha=float(doc["alpha"]),
            futility={
                rule: FutilityCalibration(
                    rule,
                    float(f["target"]),
                    float(f["scale"]),
                    _none_to_inf(f["critical_scales"]),
                    stop_rate=f.get("stop_rate"),
                    mc_se=f.get("mc_se"),
                )
                for rule, f in doc.get("futility", {}).items()
            },
            self_checks=[
                SelfCheck(c["label"], c["rejection_rate"], c["mc_se"], c["bound"])
                for c in doc.get("self_checks", [])
            ],
            digest=doc.get("digest"),
            version=doc.get("version", __version__),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise DataFileError(f"malformed calibration file ({exc})", path) from exc


def check_calibration(config: DesignConfig, result: CalibrationResult) -> None:
    expected = design_digest(config)
    if result.digest != expected:
        raise CalibrationMismatchError(
            f"calibration digest {str(result.digest)[:12]} does not match design {expected[:12]}; "
            "recalibrate this design"
        )


# ---------------------------------------------------------------------------
# Patient data
# ---------------------------------------------------------------------------


def load_patients(
    path: PathLike, config: DesignConfig, clock: Optional[float] = None
) -> List[PatientRecord]:
    """PatientDataFile rows; a censored outcome keeps its last follow-up month.

    With a clock, censored rows whose follow-up ends before it are reported:
    they enter the analysis censored early.
    """
    try:
        df = pd.read_csv(path, skipinitialspace=True, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        return []
    except (OSError, pd.errors.ParserError) as exc:
        raise DataFileError(str(exc), path) from exc

    required = PATIENT_COLUMNS + (AE_COLUMNS if config.co_primary else [])
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise DataFileError(f"missing columns: {', '.join(missing)}", path, row=0)
    has_ae = all(c in df.columns for c in AE_COLUMNS)

    stale = 0
    patients = []
    for i, row in enumerate(df.to_dict("records"), start=1):
        try:
            arm_value = float(row["arm"])
            if not arm_value.is_integer():
                raise ValueError(f"arm must be an integer, got {row['arm']!r}")
            arm = int(arm_value)
            enroll = float(row["enroll_month"])
            pfs, pfs_event = float(row["pfs_months"]), row["pfs_event"]
            ae, ae_event = (float(row["ae_months"]), row["ae_event"]) if has_ae else (0.0, 0)
        except (TypeError, ValueError) as exc:
            raise DataFileError(str(exc), path, row=i) from exc
        if not 1 <= arm <= config.n_arms:
            raise DataFileError(f"arm {arm} outside 1..{config.n_arms}", path, row=i)
        if not (enroll >= 0 and pfs >= 0 and ae >= 0):
            raise DataFileError("months must be >= 0", path, row=i)
        if pfs_event not in (0, 1) or ae_event not in (0, 1):
            raise DataFileError("event flags must be 0 or 1", path, row=i)
        if clock is not None and enroll <= clock:
            follow = clock - enroll - 1e-9
            if (pfs_event == 0 and pfs < follow) or (has_ae and ae_event == 0 and ae < follow):
                stale += 1
        patients.append(
            PatientRecord(
                arm=arm,
                enroll_time=enroll,
                efficacy_time=pfs if pfs_event == 1 else math.inf,
                toxicity_time=ae if has_ae and ae_event == 1 else math.inf,
                efficacy_censor=pfs if pfs_event == 0 else math.inf,
                toxicity_censor=ae if has_ae and ae_event == 0 else math.inf,
            )
        )
    if stale:
        logger.warning(
            "%d censored patient(s) in %s were last seen before month %g; "
            "analysing them as censored at their last follow-up",
            stale, path, clock,
        )
    return patients


def save_patients(path: PathLike, rows: Sequence[Mapping], include_ae: bool = True) -> None:
    columns = PATIENT_COLUMNS + (AE_COLUMNS if include_ae else [])
    pd.DataFrame(list(rows), columns=columns).to_csv(path, index=False)


def save_trial_record(path: PathLike, record: TrialRecord) -> None:
    """One row per arm: verdict, decision time and enrollment."""
    rows = [
        {
            "arm": k,
            "verdict": record.verdicts[k - 1],
            "decision_month": record.decision_times[k - 1],
            "enrollment": record.enrollments[k - 1],
        }
        for k in range(1, record.n_arms + 1)
    ]
    pd.DataFrame(rows).to_csv(path, index=False)


def save_draws(path: PathLike, draws: Mapping[int, np.ndarray]) -> None:
    """Posterior RMST draws as draw_id,arm,rmst."""
    frames = [
        pd.DataFrame({"draw_id": np.arange(1, len(v) + 1), "arm": arm, "rmst": np.asarray(v)})
        for arm, v in sorted(draws.items())
    ]
    pd.concat(frames, ignore_index=True)[DRAW_COLUMNS].to_csv(path, index=False)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def oc_to_document(
    reports: Sequence[OperatingCharacteristics], digest: Optional[str], kind: str
) -> Dict[str, Any]:
    first = reports[0] if reports else None
    return {
        "version": __version__,
        "digest": digest,
        "kind": kind,
        "seed": first.seed if first else None,
        "n_sims": first.n_sims if first else None,
        "scenarios": [asdict(r) for r in reports],
    }


def oc_rows(reports: Sequence[OperatingCharacteristics]) -> List[Dict[str, Any]]:
    rows = []
    for r in reports:
        for a in r.arms:
            for metric in ARM_METRICS:
                est = getattr(a, metric)
                rows.append(
                    {"scenario": r.label, "arm": a.arm, "metric": metric,
                     "estimate": est.estimate, "mc_se": est.mc_se}
                )
        study = {"duration": r.duration, "total_enrollment": r.total_enrollment}
        if r.type_one_error is not None:
            study["type_one_error"] = r.type_one_error
        for metric, est in study.items():
            rows.append(
                {"scenario": r.label, "arm": "all", "metric": metric,
                 "estimate": est.estimate, "mc_se": est.mc_se}
            )
    return rows


def save_oc(
    json_path: PathLike,
    csv_path: PathLike,
    reports: Sequence[OperatingCharacteristics],
    digest: Optional[str],
    kind: str,
) -> None:
    _write_json(json_path, oc_to_document(reports, digest, kind))
    pd.DataFrame(oc_rows(reports), columns=OC_COLUMNS).to_csv(csv_path, index=False)


def save_power_curve(
    path: PathLike, result: SampleSizeResult, digest: Optional[str], seed: int
) -> None:
    """One row per grid point, each stamped with the run it came from."""
    stamp = {"target": result.target, "seed": seed, "digest": digest, "version": __version__}
    rows = [{**asdict(p), **stamp} for p in result.curve]
    pd.DataFrame(rows, columns=POWER_COLUMNS).to_csv(path, index=False)
