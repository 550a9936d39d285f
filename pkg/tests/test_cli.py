import json
import subprocess
import sys

import pytest

from uavdq.cli import EXIT_INFEASIBLE, EXIT_INVALID, EXIT_OK, main

SMALL = {"distribution": {"num_ground": 3, "num_aerial": 2, "endurance": 12},
         "learn": {"episodes": 300}}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SMALL))
    return str(path)


@pytest.fixture
def scenario_file(tmp_path, config):
    assert main(["generate", "--config", config, "--seed", "7", "--out", str(tmp_path / "gen")]) == EXIT_OK
    return str(tmp_path / "gen" / "scenario.json")


def _files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


COMMANDS = [
    ["generate"],
    ["train", "--plot"],
    ["train", "--algorithm", "q-learning"],
    ["evaluate", "--algorithms", "double-q,random,oracle"],
    ["evaluate", "--order", "4,3,2,1,0"],
    ["sweep", "--var", "endurance", "--values", "6,12", "--runs", "3", "--plot"],
    ["sweep", "--var", "users", "--values", "3,5", "--runs", "2", "--algorithms", "random,oracle"],
    ["convergence", "--plot"],
    ["convergence", "--users", "3,4", "--runs", "2"],
    ["oracle"],
    ["trajectory", "--algorithm", "oracle", "--plot"],
]


@pytest.mark.parametrize("argv", COMMANDS, ids=lambda a: "-".join(a[:3]))
def test_subcommands_are_deterministic(tmp_path, config, argv):
    outs = []
    for name, extra in (("one", []), ("two", []), ("par", ["--workers", "2"])):
        out = tmp_path / name
        assert main(argv + ["--config", config, "--seed", "5", "--out", str(out)] + extra) == EXIT_OK
        outs.append(_files(out))
    assert outs[0] and outs[0] == outs[1] == outs[2]


def test_scenario_file_input(tmp_path, scenario_file, capsys):
    out = tmp_path / "o"
    assert main(["oracle", "--scenario", scenario_file, "--out", str(out)]) == EXIT_OK
    line = (out / "oracle.csv").read_text().split("\n")[1]
    assert line.endswith(",5")
    assert "oracle.csv" in capsys.readouterr().out


def test_sweep_prints_summary(tmp_path, config, capsys):
    main(["sweep", "--config", config, "--runs", "2", "--algorithms", "random", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert "sweep_var,sweep_value,algorithm,mean_satisfied,std_satisfied,runs" in out
    assert "none,,random," in out


def test_sweep_from_config_section(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({**SMALL, "sweep": {"var": "speed", "values": [10, 40]}, "runs": 2,
                                "algorithms": ["random"]}))
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_OK
    text = (tmp_path / "o" / "summary.csv").read_text()
    assert "speed,10,random" in text and "speed,40,random" in text


def test_oracle_cap_exit_code(tmp_path, capsys):
    code = main(["oracle", "--out", str(tmp_path)])  # default distribution has 20 users
    assert code == EXIT_INFEASIBLE
    assert "cap of 9" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["sweep", "--var", "endurance"],
    ["sweep", "--var", "users", "--values", "a,b"],
    ["evaluate", "--order", "0,0"],
    ["train", "--episodes", "-3"],
    ["oracle", "--scenario", "/nonexistent/s.json"],
])
def test_validation_errors_exit_one(tmp_path, config, argv):
    assert main(argv + ["--config", config, "--out", str(tmp_path)]) == EXIT_INVALID


@pytest.mark.parametrize("argv", [["frobnicate"], ["sweep", "--var", "altitude", "--values", "1"]])
def test_usage_errors_exit_one(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == EXIT_INVALID


def test_bad_config_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  nope }")
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_INVALID
    bad.write_text(json.dumps({"colour": "red"}))
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_INVALID
    bad.write_text(json.dumps({"distribution": {"num_ground": -2}}))
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_INVALID


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "uavdq.cli", "generate", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and (tmp_path / "scenario.json").exists()
