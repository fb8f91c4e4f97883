"""Tests for the command-line surface: exit codes, reports and replay."""
import argparse
import json
from unittest.mock import patch

import pandas as pd
import pytest

from app.cli import main
from app.commands import DECISION_EXIT_CODES, EXIT_INVALID, EXIT_OK
from app.commands.montecarlo import parse_grid
from app.core.calibration import (
    INFERIORITY,
    INTERIOR_LABEL,
    CalibrationResult,
    FutilityCalibration,
    SelfCheck,
)
from app.core.models import (
    CLOSE_NOT_REJECTED,
    DECLARE_NI,
    INFERIOR_STOP,
    NON_INFERIOR,
    NOT_REJECTED,
    STOP_INFERIOR,
    STOP_TOXICITY,
)

# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

EFFICACY_DOC = {
    "n_arms": 2,
    "theta0": 22.0,
    "delta": 2.0,
    "max_per_arm": 30,
    "follow_up": 6.0,
    "accrual_rate": 10.0,
    "b_ni": {"scale": 0.2},
    "b_inf": {"scale": 0.3, "activation": 5},
    "posterior_draws": 200,
}

COPRIMARY_DOC = {
    "n_arms": 1,
    "theta0": 22.0,
    "delta": 2.0,
    "delta_low": 3.0,
    "beta0": 12.49,
    "endpoint": "co-primary",
    "max_per_arm": 100,
}

NULL_SCENARIOS = [
    {
        "label": "null",
        "arms": [
            {"efficacy": {"kind": "exponential", "rmst": 20.0}, "theta": 20.0},
            {"efficacy": {"kind": "exponential", "rmst": 20.0}},
        ],
    }
]

PATIENT_HEADER = "arm,enroll_month,pfs_months,pfs_event\n"

VERDICT_DECISIONS = {
    NON_INFERIOR: DECLARE_NI,
    INFERIOR_STOP: STOP_INFERIOR,
    NOT_REJECTED: CLOSE_NOT_REJECTED,
}


def _json(path, doc):
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return str(path)


@pytest.fixture
def design_path(tmp_path):
    return _json(tmp_path / "design.json", EFFICACY_DOC)


@pytest.fixture
def calibration():
    return CalibrationResult(
        s_ni=0.21,
        per_scenario={"ph": 0.21, "aft": 0.25, "po": 0.3},
        critical_scales={"ph": [0.21], "aft": [0.25], "po": [0.3]},
        n_sims=100,
        seed=1,
        alpha=0.1,
        s_inf=0.3,
        self_checks=[SelfCheck("ph", 0.09, 0.0286, 0.16)],
    )


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def test_validate_ok(design_path, capsys):
    """A consistent design validates with exit 0 and a summary."""
    assert main(["validate", "--config", design_path]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Design OK" in out
    assert "digest" in out


def test_validate_reports_line(tmp_path, capsys):
    """delta_low > delta is refused and addressed by line."""
    path = _json(tmp_path / "coprimary.json", COPRIMARY_DOC)
    assert main(["validate", "--config", path]) == EXIT_INVALID
    out = capsys.readouterr().out
    assert "line 5: delta_low" in out


def test_validate_unknown_key(tmp_path, capsys):
    """Unknown keys are validation problems."""
    path = _json(tmp_path / "design.json", dict(EFFICACY_DOC, shoe_size=44))
    assert main(["validate", "--config", path]) == EXIT_INVALID
    assert "shoe_size: unknown key" in capsys.readouterr().out


def test_validate_missing_file(tmp_path):
    """A missing design file exits 2."""
    assert main(["validate", "--config", str(tmp_path / "absent.json")]) == EXIT_INVALID


def test_version(capsys):
    """--version prints the program name and exits."""
    with pytest.raises(SystemExit):
        main(["--version"])
    assert "deintensify" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------


def test_calibrate_writes_file_validate_applies_it(tmp_path, design_path, calibration, capsys):
    """A written calibration applies cleanly to its own design."""
    out = str(tmp_path / "calib.json")
    with patch("app.commands.montecarlo.calibrate_design", return_value=calibration) as calib:
        code = main(["calibrate", "--config", design_path, "--sims", "100", "--seed", "1",
                     "--workers", "1", "--out", out])
    assert code == EXIT_OK
    assert calib.call_args.args[1:3] == (100, 1)
    assert "<- worst case" in capsys.readouterr().out

    assert main(["validate", "--config", design_path, "--calib", out]) == EXIT_OK
    assert "scale 0.21" in capsys.readouterr().out


def test_calibrate_flags_interior_worst_case(tmp_path, design_path, calibration, capsys):
    """An interior null rejecting most often on fresh replicates is called out."""
    calibration.self_checks.append(SelfCheck(INTERIOR_LABEL, 0.12, 0.0325, 0.16))
    with patch("app.commands.montecarlo.calibrate_design", return_value=calibration):
        main(["calibrate", "--config", design_path, "--seed", "1",
              "--out", str(tmp_path / "calib.json")])
    out = capsys.readouterr().out
    assert "Interior null is the worst case" in out
    assert out.count("<- highest") == 1


def test_calibrate_reports_futility_stop_rate(tmp_path, design_path, calibration, capsys):
    """The fresh futility stop rate is printed with its MC SE."""
    calibration.futility[INFERIORITY] = FutilityCalibration(
        INFERIORITY, 0.2, 0.3, [], stop_rate=0.5, mc_se=0.04
    )
    with patch("app.commands.montecarlo.calibrate_design", return_value=calibration):
        main(["calibrate", "--config", design_path, "--seed", "1",
              "--out", str(tmp_path / "calib.json")])
    out = capsys.readouterr().out
    assert "fresh stop rate 0.5000 (MC SE 0.0400)" in out
    assert "OFF TARGET" in out
    assert "Interior null" not in out


def test_calibration_for_another_design(tmp_path, design_path, calibration):
    """Applying a calibration to a changed design exits 2."""
    out = str(tmp_path / "calib.json")
    with patch("app.commands.montecarlo.calibrate_design", return_value=calibration):
        main(["calibrate", "--config", design_path, "--seed", "1", "--out", out])
    changed = _json(tmp_path / "changed.json", dict(EFFICACY_DOC, theta0=23.0))
    assert main(["validate", "--config", changed, "--calib", out]) == EXIT_INVALID


def test_too_few_simulations_is_usage_error(design_path, tmp_path):
    """--sims below the minimum is rejected by the parser."""
    with pytest.raises(SystemExit) as excinfo:
        main(["calibrate", "--config", design_path, "--sims", "10", "--seed", "1",
              "--out", str(tmp_path / "c.json")])
    assert excinfo.value.code == 2


# ---------------------------------------------------------------------------
# decide
# ---------------------------------------------------------------------------


def test_decide_without_data(tmp_path, design_path, capsys):
    """No enrolled patients: continue with exit 0."""
    data = tmp_path / "patients.csv"
    data.write_text(PATIENT_HEADER, encoding="utf-8")
    assert main(["decide", "--config", design_path, "--data", str(data), "--time", "1"]) == 0
    assert "Decision: continue" in capsys.readouterr().out


def test_decide_stop_inferior(tmp_path, design_path, capsys):
    """Ten early events on arm 1 stop it for inferiority (exit 4) and export draws."""
    rows = "".join(f"1,{0.1 * i:.1f},{0.05 + 0.01 * i:.2f},1\n" for i in range(1, 11))
    data = tmp_path / "patients.csv"
    data.write_text(PATIENT_HEADER + rows, encoding="utf-8")
    draws = tmp_path / "draws.csv"
    code = main(["decide", "--config", design_path, "--data", str(data), "--time", "2",
                 "--seed", "3", "--draws", str(draws)])
    assert code == DECISION_EXIT_CODES[STOP_INFERIOR] == 4
    assert "Decision: stop-inferior" in capsys.readouterr().out
    assert len(pd.read_csv(draws)) == EFFICACY_DOC["posterior_draws"]


def test_decide_stop_toxicity_reports_branch(tmp_path, capsys):
    """Early AEs on a co-primary arm stop it for toxicity under the delta_low branch."""
    doc = dict(
        COPRIMARY_DOC,
        delta_low=1.0,
        max_per_arm=30,
        b_ni={"scale": 0.2},
        b_inf={"scale": 0.1, "activation": 5},
        b_tox={"scale": 0.3, "activation": 5},
        posterior_draws=200,
    )
    path = _json(tmp_path / "coprimary.json", doc)
    header = PATIENT_HEADER.strip() + ",ae_months,ae_event\n"
    rows = "".join(
        f"1,{0.1 * i:.1f},{2.0 - 0.1 * i:.1f},0,{0.05 + 0.01 * i:.2f},1\n" for i in range(1, 11)
    )
    data = tmp_path / "patients.csv"
    data.write_text(header + rows, encoding="utf-8")
    code = main(["decide", "--config", path, "--data", str(data), "--time", "2"])
    assert code == DECISION_EXIT_CODES[STOP_TOXICITY] == 5
    out = capsys.readouterr().out
    assert "(delta_low;" in out
    assert "P(toxicity)" in out


def test_decide_before_first_enrollment(tmp_path, design_path):
    """An analysis month before anyone enrolled is a data error."""
    data = tmp_path / "patients.csv"
    data.write_text(PATIENT_HEADER + "1,3.0,1.0,1\n", encoding="utf-8")
    assert main(["decide", "--config", design_path, "--data", str(data), "--time", "2"]) == 2


def test_decide_uncalibrated(tmp_path):
    """A Bayesian decision needs every scale."""
    doc = dict(EFFICACY_DOC, b_ni={"shape": 1.0})
    path = _json(tmp_path / "design.json", doc)
    data = tmp_path / "patients.csv"
    data.write_text(PATIENT_HEADER + "1,0.5,1.0,1\n", encoding="utf-8")
    assert main(["decide", "--config", path, "--data", str(data), "--time", "2"]) == 2


def test_decide_comparator_needs_section(tmp_path, design_path):
    """--kind comparator on a design without a comparator section exits 2."""
    data = tmp_path / "patients.csv"
    data.write_text(PATIENT_HEADER, encoding="utf-8")
    code = main(["decide", "--config", design_path, "--data", str(data), "--time", "1",
                 "--kind", "comparator"])
    assert code == EXIT_INVALID


def test_decide_bad_arm(tmp_path, design_path):
    """Arm 3 in a two-arm design is reported with its row."""
    data = tmp_path / "patients.csv"
    data.write_text(PATIENT_HEADER + "1,0.5,1.0,1\n3,0.6,1.0,1\n", encoding="utf-8")
    assert main(["decide", "--config", design_path, "--data", str(data), "--time", "2"]) == 2


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def test_simulate_and_replay(tmp_path, design_path, capsys):
    """An exported trial replays to the decision its record reports."""
    scenarios = _json(tmp_path / "scenarios.json", NULL_SCENARIOS)
    out = tmp_path / "oc.json"
    patients = tmp_path / "patients.csv"
    record = tmp_path / "record.csv"
    code = main(["simulate", "--config", design_path, "--scenarios", scenarios,
                 "--sims", "100", "--seed", "17", "--workers", "1", "--out", str(out),
                 "--export-patients", str(patients), "--export-record", str(record)])
    assert code == EXIT_OK
    assert "type I error" in capsys.readouterr().out
    assert out.with_suffix(".csv").exists()

    arm1 = pd.read_csv(record).iloc[0]
    decision = VERDICT_DECISIONS[arm1["verdict"]]
    code = main(["decide", "--config", design_path, "--data", str(patients),
                 "--time", str(arm1["decision_month"]), "--seed", "17"])
    assert code == DECISION_EXIT_CODES[decision]


def test_simulate_comparator_needs_section(tmp_path, design_path):
    """Comparator simulation of a design without a comparator section exits 2."""
    scenarios = _json(tmp_path / "scenarios.json", NULL_SCENARIOS)
    code = main(["simulate", "--config", design_path, "--scenarios", scenarios, "--seed", "1",
                 "--kind", "comparator", "--out", str(tmp_path / "oc.json")])
    assert code == EXIT_INVALID


def test_simulate_scenario_mismatch(tmp_path, design_path):
    """A scenario with the wrong number of arms exits 2."""
    one_arm = [{"label": "x", "arms": [{"efficacy": {"kind": "no-event"}}]}]
    scenarios = _json(tmp_path / "scenarios.json", one_arm)
    code = main(["simulate", "--config", design_path, "--scenarios", scenarios, "--seed", "1",
                 "--out", str(tmp_path / "oc.json")])
    assert code == EXIT_INVALID


# ---------------------------------------------------------------------------
# samplesize
# ---------------------------------------------------------------------------


def test_parse_grid_list():
    assert parse_grid("60,80,100") == [60, 80, 100]


def test_parse_grid_range():
    """start:stop:step includes stop."""
    assert parse_grid("60:120:20") == [60, 80, 100, 120]


@pytest.mark.parametrize("text", ["", "80,60", "a,b", "0,10", "10:20:0"])
def test_parse_grid_rejects(text):
    with pytest.raises(argparse.ArgumentTypeError):
        parse_grid(text)


def test_samplesize_unknown_label(tmp_path, design_path):
    """Asking for a scenario label that is not in the file exits 2."""
    scenarios = _json(tmp_path / "scenarios.json", NULL_SCENARIOS)
    code = main(["samplesize", "--config", design_path, "--scenario", scenarios,
                 "--label", "missing", "--target-power", "0.8", "--grid", "20,30",
                 "--sims", "100", "--seed", "1"])
    assert code == EXIT_INVALID
