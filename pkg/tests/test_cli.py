import json

import pandas as pd
import pytest

from multivirus_defense import __version__
from multivirus_defense.cli import EXIT_CONFIG, EXIT_ENGINE, EXIT_OK, main
from multivirus_defense.network import path, read_edge_list, write_edge_list


@pytest.fixture
def net_file(tmp_path):
    target = tmp_path / "path4.txt"
    write_edge_list(path(4), target)
    return str(target)


def test_version(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_gen_net(tmp_path):
    out = tmp_path / "er.txt"
    assert main(["gen-net", "--n", "10", "--p", "0.3", "--seed", "2", "--out", str(out)]) == EXIT_OK
    assert read_edge_list(out).n == 10


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == EXIT_OK
    names = capsys.readouterr().out.split()
    assert "fig3-coexist" in names and "oracle-path3" in names


def test_sim_mf_writes_csv(tmp_path, net_file):
    out = tmp_path / "mf.csv"
    code = main(
        ["sim-mf", "--net", net_file, "--lambdas", "1.0", "2.0", "--beta", "2.0",
         "--horizon", "1.0", "--grid", "5", "--out", str(out)]
    )
    assert code == EXIT_OK
    frame = pd.read_csv(out)
    assert list(frame.columns) == [
        "t", "mean_frac_any", "se_any", "mean_frac_v1", "mean_frac_v2", "mean_beta", "mean_q",
    ]
    assert len(frame) == 5


def test_passivity_json(tmp_path, net_file):
    out = tmp_path / "rho.json"
    assert main(["passivity", "--net", net_file, "--lambdas", "1.0", "--out", str(out)]) == EXIT_OK
    data = json.loads(out.read_text())
    assert data["rho_bound"] > 0
    assert len(data["host_bounds"]) == 4


def test_design_static_json(tmp_path, net_file):
    out = tmp_path / "design.json"
    code = main(["design-static", "--net", net_file, "--lambdas", "1.0", "--eps", "0.5", "--out", str(out)])
    assert code == EXIT_OK
    data = json.loads(out.read_text())
    assert data["feasible"] is True
    assert len(data["beta"]) == 4


def test_missing_net_file_is_config_error(tmp_path):
    assert main(["sim-mf", "--net", str(tmp_path / "nope.txt")]) == EXIT_CONFIG


def test_bad_scenario_is_config_error(tmp_path, capsys):
    scenario = tmp_path / "bad.toml"
    scenario.write_text('name = "bad"\n[defense]\nbetas = 1.0\n')
    assert main(["run-scenario", str(scenario), "--out-dir", str(tmp_path)]) == EXIT_CONFIG
    assert "betas" in capsys.readouterr().err


def test_single_virus_law_on_two_viruses_is_engine_error(net_file):
    code = main(
        ["adaptive-run", "--net", net_file, "--controller", "nonmonotone", "--alpha", "1",
         "--gamma", "0.1", "--horizon", "1", "--grid", "3"]
    )
    assert code == EXIT_ENGINE


def test_run_scenario_writes_outputs(tmp_path, net_file):
    scenario = tmp_path / "tiny.toml"
    scenario.write_text(
        'name = "tiny"\n[network]\nkind = "file"\nfile = "path4.txt"\n'
        '[model]\nlambdas = [1.0]\n[run]\nhorizon = 1.0\ngrid_points = 5\ntrials = 20\nrandom_states = 50\n'
    )
    out_dir = tmp_path / "out"
    assert main(["run-scenario", str(scenario), "--out-dir", str(out_dir)]) == EXIT_OK
    report = json.loads((out_dir / "tiny.json").read_text())
    assert report["name"] == "tiny"
    assert (out_dir / "tiny-meanfield.csv").is_file()
