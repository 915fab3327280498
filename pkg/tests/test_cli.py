"""CLI behaviour: delimited output, artifact files, exit codes."""

import json

import pytest

from glteleop.cli import main
from glteleop.harness import replay_log
from glteleop.library import switch_stress_scenario
from glteleop.scenario import builtin_scenario_names, save_scenario


def test_run_builtin_prints_waypoints_and_summary(capsys, tmp_path):
    code = main(["run", "precision-fine",
                 "--log", str(tmp_path / "run.jsonl"),
                 "--report", str(tmp_path / "report.json")])
    out = capsys.readouterr().out.strip().splitlines()
    assert code == 0
    assert out[0].startswith("waypoint\t0\t")
    summary = out[-1].split("\t")
    assert summary[0] == "summary"
    assert summary[1] == "precision-fine"
    assert summary[3] == "1"  # passed
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["passed"] is True
    assert report["log_digest"] == summary[-1]
    assert replay_log(tmp_path / "run.jsonl").passed


def test_run_scenario_file_and_figures(capsys, tmp_path):
    path = tmp_path / "stress.yaml"
    save_scenario(switch_stress_scenario(5), path)
    code = main(["run", str(path), "--figures", str(tmp_path / "figs")])
    assert code == 0
    assert (tmp_path / "figs" / "ee_path.png").exists()
    summary = capsys.readouterr().out.strip().splitlines()[-1].split("\t")
    assert summary[4] == "4"  # mode switches


def test_run_unknown_scenario_is_usage_error(capsys):
    code = main(["run", "no-such-scenario"])
    assert code == 2
    err = capsys.readouterr().err
    assert "no such file or built-in" in err
    assert "switch-stress" in err


def test_replay_round_trip_and_tamper(capsys, tmp_path):
    log = tmp_path / "run.jsonl"
    assert main(["run", "safe-hold-probe", "--log", str(log)]) == 0
    assert main(["replay", str(log)]) == 0
    lines = log.read_text().splitlines()
    lines[20] = lines[20].replace("0", "1", 1)
    log.write_text("\n".join(lines) + "\n")
    assert main(["replay", str(log)]) == 1
    out = capsys.readouterr().out.strip().splitlines()[-1]
    assert out.startswith("replay\t0\t20\t")


def test_scenarios_lists_builtins(capsys):
    assert main(["scenarios"]) == 0
    assert capsys.readouterr().out.split() == builtin_scenario_names()


def test_hand_template_writes_editable_file(capsys, tmp_path):
    out = tmp_path / "hand.yaml"
    assert main(["hand-template", str(out)]) == 0
    assert "open" in out.read_text() and "closed" in out.read_text()


def test_failing_scenario_exits_one(capsys, tmp_path):
    # A goal the arm never approaches: report fails, exit code says so.
    import dataclasses

    from glteleop.scenario import WaypointGoal

    script = switch_stress_scenario(6)
    bad_goal = WaypointGoal(t=9.9, position=(1.0, 1.0, 1.0),
                            orientation_wxyz=(1.0, 0.0, 0.0, 0.0),
                            pos_tol=1e-4, rot_tol=1e-3)
    script = dataclasses.replace(script, waypoints=script.waypoints + (bad_goal,))
    path = tmp_path / "fail.yaml"
    save_scenario(script, path)
    assert main(["run", str(path)]) == 1
