import json
from textwrap import dedent

import pytest

import sotneuron.cli as cli
from sotneuron.cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO, EXIT_OK, EXIT_TRAINING, main
from sotneuron.config import CONFIG_ENV, MNIST_ENV
from sotneuron.exc import IntegrationDivergedError
from sotneuron.montecarlo import PhaseDiagram, SweepGrid, bernoulli_estimate, write_phase_diagram

SHORT_SCHEDULE = """
[schedule]
t_clock = 0.2e-9
t_write = 0.1e-9
relax = 0.1e-9
"""


@pytest.fixture(autouse=True)
def isolated(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    monkeypatch.delenv(MNIST_ENV, raising=False)


@pytest.fixture
def out(tmp_path):
    return tmp_path / "out"


def write_config(path, text):
    path.write_text(dedent(text))
    return str(path)


def data_rows(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


# Power and configuration
# -----------------------

def test_power(out, capsys):
    assert main(["power", "--out", str(out)]) == EXIT_OK
    data = json.loads((out / "power.json").read_text())
    assert data["clock"]["power_W"] == pytest.approx(7.225e-6)
    assert data["clock"]["energy_per_clock_J"] == pytest.approx(14.45e-15)
    assert data["clock"]["R_HM_ohm"] == pytest.approx(1000.0)
    assert "rcn_static" not in data
    assert data["provenance"]["seed"] == 0
    assert capsys.readouterr().out.split() == [str(out / "power.json")]

    # The warning about the missing crossbar is kept with the results
    events = (out / "events.csv").read_text()
    assert "No conductance file" in events

def test_unknown_config_key(tmp_path, out, caplog):
    config = write_config(tmp_path / "config.toml", """
    seed = 1
    bogus = 2
    """)
    assert main(["power", "--config", config, "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert "bogus" in caplog.text

def test_invalid_nested_value(tmp_path, out, caplog):
    config = write_config(tmp_path / "config.toml", """
    [device.material]
    alpha = -1.0
    """)
    assert main(["power", "--config", config, "--out", str(out)]) == EXIT_CONFIG
    assert "device.material.alpha" in caplog.text

def test_invalid_toml(tmp_path, out):
    config = write_config(tmp_path / "config.toml", "seed = = 1\n")
    assert main(["power", "--config", config, "--out", str(out)]) == EXIT_CONFIG

def test_missing_config(tmp_path, out):
    assert main(["power", "--config", str(tmp_path / "missing.toml"), "--out", str(out)]) == EXIT_CONFIG

def test_config_from_environment(tmp_path, out, monkeypatch):
    config = write_config(tmp_path / "config.toml", """
    seed = 3

    [schedule]
    I_clock = 100e-6
    """)
    monkeypatch.setenv(CONFIG_ENV, config)
    assert main(["power", "--out", str(out), "--seed", "7"]) == EXIT_OK
    data = json.loads((out / "power.json").read_text())
    assert data["clock"]["power_W"] == pytest.approx(1e-5)
    # Flags override the file
    assert data["provenance"]["seed"] == 7
    assert data["provenance"]["config"]["schedule"]["I_clock"] == 100e-6


# Device simulations
# ------------------

def test_switch(tmp_path, out):
    config = write_config(tmp_path / "config.toml", """
    [device.material]
    T = 0.0

    [schedule]
    I_clock = 200e-6
    I_write = 20e-6
    t_clock = 2e-9
    t_write = 1e-9
    relax = 1e-9
    """)
    assert main(["switch", "--config", config, "--out", str(out), "--repeats", "2"]) == EXIT_OK
    summary = json.loads((out / "switch_summary.json").read_text())
    assert summary["final_states"] == ["AP", "AP"]
    assert summary["ap_fraction"] == 1.0
    assert summary["clock_power_W"] == pytest.approx(4e-5)

    rows = data_rows(out / "trajectory_0.csv")
    assert rows[0] == "t[s],mx,my,mz,E[kT]"
    assert len(rows) > 100
    assert (out / "trajectory_1.csv").exists()

def test_switch_divergence(out, monkeypatch):
    def diverging(*args, **kwargs):
        raise IntegrationDivergedError("Magnetization became non-finite", step=12, trial=0)

    monkeypatch.setattr(cli, "simulate_two_step", diverging)
    assert main(["switch", "--out", str(out)]) == EXIT_DIVERGED
    assert "diverged" in (out / "events.csv").read_text()

def test_phase_diagram_reproducible(tmp_path):
    config = write_config(tmp_path / "config.toml", SHORT_SCHEDULE + """
    [sweep]
    clock_levels = [60e-6, 85e-6]
    write_levels = [-5e-6, 5e-6]
    trials_per_point = 2
    """)
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["phase-diagram", "--config", config, "--out", str(first), "--seed", "5"]) == EXIT_OK
    assert main(["phase-diagram", "--config", config, "--out", str(second), "--seed", "5"]) == EXIT_OK

    rows = data_rows(first / "phase_diagram.csv")
    assert rows[0] == "I_clock,I_write,n,p_hat,ci95,successes,error"
    assert len(rows) == 5
    assert rows == data_rows(second / "phase_diagram.csv")
    assert (first / "phase_diagram.json").exists()


# Network pipeline
# ----------------

@pytest.fixture
def network_config(tmp_path, synthetic_mnist):
    return write_config(tmp_path / "config.toml", f"""
    [network]
    mnist_dir = "{synthetic_mnist.as_posix()}"
    runs_per_image = 2

    [network.training]
    epochs = 100
    min_train_accuracy = 0.5
    """)

def saturated_diagram():
    grid = SweepGrid(clock_levels=[85e-6], write_levels=[-1e-3, -1e-9, 1e-9, 1e-3], trials_per_point=10, master_seed=0)
    return PhaseDiagram(grid=grid, estimates=[[bernoulli_estimate(10, 10)] * 4])

def test_network_pipeline(network_config, out):
    assert main(["train", "--config", network_config, "--out", str(out)]) == EXIT_OK
    assert (out / "weights.json").exists()
    assert main(["quantize", "--config", network_config, "--out", str(out)]) == EXIT_OK
    assert (out / "conductances.json").exists()

    write_phase_diagram(saturated_diagram(), out)
    assert main(["evaluate", "--config", network_config, "--out", str(out)]) == EXIT_OK
    deterministic = json.loads((out / "accuracy_deterministic.json").read_text())
    lookup = json.loads((out / "accuracy_lookup.json").read_text())
    assert deterministic["n_images"] == 100
    assert deterministic["accuracy"] >= 0.7
    assert lookup["runs_per_image"] == 2
    assert len(data_rows(out / "accuracy_lookup_runs.csv")) == 1 + 200

    assert main(["infer", "--config", network_config, "--out", str(out), "--mode", "deterministic"]) == EXIT_OK
    assert len(data_rows(out / "predictions.csv")) == 1 + 100

    assert main(["power", "--config", network_config, "--out", str(out)]) == EXIT_OK
    power = json.loads((out / "power.json").read_text())
    assert power["rcn_static"]["hidden_W"] > 0
    assert power["rcn_static"]["output_W"] > 0

def test_missing_mnist_dir(out):
    assert main(["train", "--out", str(out)]) == EXIT_CONFIG

def test_missing_conductances(network_config, out):
    assert main(["evaluate", "--config", network_config, "--out", str(out), "--mode", "deterministic"]) == EXIT_IO

def test_broken_conductances(network_config, out):
    out.mkdir()
    (out / "conductances.json").write_text('{"name": "conductances", "schema_version": 1}')
    assert main(["evaluate", "--config", network_config, "--out", str(out), "--mode", "deterministic"]) == EXIT_IO

def test_training_failure(tmp_path, synthetic_mnist, out):
    config = write_config(tmp_path / "config.toml", f"""
    [network]
    mnist_dir = "{synthetic_mnist.as_posix()}"

    [network.training]
    epochs = 1
    learning_rate = 1e-6
    min_train_accuracy = 1.0
    """)
    assert main(["train", "--config", config, "--out", str(out)]) == EXIT_TRAINING
    assert not (out / "weights.json").exists()
