import json
import subprocess
import sys

import pytest

from hitmodel import EpisodeSchedule
from hitmodel.cli import main
from hitmodel.dataio import read_counts, write_schedule

from conftest import daily_grid

BOUNDS = {"c": [0, 5], "D": [-1, 1], "P": [-0.01, 0.01]}


@pytest.fixture
def schedule(tmp_path):
    grid = daily_grid(60)
    sched = EpisodeSchedule.from_dates([grid.date_at(k) for k in range(0, 60, 7)])
    return write_schedule(sched, tmp_path / "schedule.csv")


@pytest.fixture
def bounds(tmp_path):
    path = tmp_path / "bounds.json"
    path.write_text(json.dumps(BOUNDS))
    return path


def synth(tmp_path, schedule, *extra):
    out = tmp_path / "data"
    grid = daily_grid(60)
    argv = ["synth", "--schedule", str(schedule), "--impulse-channel", "tv",
            "--start", grid.t0.isoformat(), "--end", grid.end.isoformat(), "--c", "0.5", "--D", "-0.05", "--P", "0.001", "--I0", "10",
            "--out-dir", str(out), *extra]
    assert main(argv) == 0
    return out


def test_synth_then_fit_recovers(tmp_path, schedule, bounds):
    data = synth(tmp_path, schedule)
    params = json.loads((data / "params.json").read_text())
    assert params["channels"] == ["tv"] and params["noise"]["sigma"] == 0.0
    out = tmp_path / "fit"
    assert main(["fit", "--counts", str(data / "counts.csv"),
                 "--exposures", str(data / "exposures.csv"), "--bounds", str(bounds),
                 "--true-params", str(data / "params.json"), "--out-dir", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["recovery"]["max_relative_error"] <= 0.01
    assert report["config"]["fit"]["D_bounds"] == [-1, 1]
    assert set(report["inputs"]) == {"counts", "exposures", "true_params"}
    assert (out / "fit_curve.csv").read_text().startswith("date,observed,model,tv\n")


def test_fit_windows_eleven_episodes(tmp_path, bounds):
    grid = daily_grid(77)
    sched = write_schedule(EpisodeSchedule.from_dates([grid.date_at(7 * k) for k in range(11)]),
                           tmp_path / "s.csv")
    data = tmp_path / "data"
    assert main(["synth", "--schedule", str(sched), "--impulse-channel", "tv",
                 "--start", grid.t0.isoformat(), "--end", grid.end.isoformat(),
                 "--c", "2", "--D", "-0.3", "--P", "0", "--I0", "1",
                 "--out-dir", str(data)]) == 0
    out = tmp_path / "fw"
    assert main(["fit-windows", "--counts", str(data / "counts.csv"), "--schedule", str(sched),
                 "--impulse-channel", "tv", "--bounds", str(bounds), "--starts", "8",
                 "--out-dir", str(out)]) == 0
    lines = (out / "episode_params.csv").read_text().splitlines()
    assert lines[0] == "episode_label,c_tv,D,P,I0,sse,rmse,r_squared"
    assert [line.split(",")[0] for line in lines[1:]] == [str(k) for k in range(1, 12)]


def test_mismatched_params_file(tmp_path, schedule, capsys):
    data = synth(tmp_path, schedule)
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"c": [1.0, 2.0], "D": 0, "P": 0, "I0": 1}))
    code = main(["fit", "--counts", str(data / "counts.csv"),
                 "--exposures", str(data / "exposures.csv"), "--true-params", str(wrong),
                 "--out-dir", str(tmp_path / "x")])
    err = capsys.readouterr().err.strip().splitlines()
    assert code != 0
    assert len(err) == 1 and err[0].startswith("error DimensionMismatch:")


def test_simulate_rejects_mismatched_params(tmp_path, schedule, capsys):
    data = synth(tmp_path, schedule)
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"c": [1.0, 2.0], "D": 0, "P": 0, "I0": 1}))
    code = main(["simulate", "--exposures", str(data / "exposures.csv"), "--params", str(wrong),
                 "--out-dir", str(tmp_path / "x")])
    assert code == 1
    assert capsys.readouterr().err.startswith("error DimensionMismatch:")


def test_simulate_writes_series(tmp_path):
    assert main(["simulate", "--start", "2016-10-11", "--end", "2016-10-21", "--D", "0.1",
                 "--P", "0", "--I0", "1", "--out-dir", str(tmp_path)]) == 0
    series = read_counts(tmp_path / "simulated.csv")
    assert series.grid.n_points == 11
    assert series.values[-1] == pytest.approx(1.1 ** 10, rel=1e-12)


def test_report_is_reproducible(tmp_path, schedule, bounds):
    data = synth(tmp_path, schedule, "--sigma", "0.2", "--seed", "4")
    reports = []
    for _ in range(2):
        argv = ["fit", "--counts", str(data / "counts.csv"), "--exposures",
                str(data / "exposures.csv"), "--bounds", str(bounds), "--seed", "4",
                "--starts", "16", "--out-dir", str(tmp_path / "out")]
        assert main(argv) == 0
        lines = (tmp_path / "out" / "report.json").read_text().splitlines()
        reports.append([line for line in lines if "wall_clock_seconds" not in line])
    assert reports[0] == reports[1]


@pytest.mark.parametrize("argv, code", [
    (["fit", "--counts", "missing.csv"], "error FileNotFoundError"),
    (["simulate", "--D", "0", "--P", "0", "--I0", "1"], "error UsageError"),
    (["simulate", "--start", "2016-10-11", "--end", "2016-10-21", "--D", "0", "--P", "0",
      "--I0", "1", "--dt", "0.5"], "error UsageError"),
])
def test_errors_are_one_line(tmp_path, argv, code, capsys):
    assert main(argv + ["--out-dir", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert err.startswith(code) and err.count("\n") == 1


def test_fit_windows_needs_schedule(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["fit-windows", "--counts", "x.csv"])
    assert info.value.code == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hitmodel", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("hitmodel")
