import logging
import warnings

import numpy as np
import pytest

from sotneuron.exc import FormatError, LookupClampWarning
from sotneuron.montecarlo import (
    PhaseDiagram, PointEstimate, PointFailure, SweepGrid, bernoulli_estimate,
    firing_probability, probability_lookup, read_phase_diagram, write_phase_diagram,
)

CLOCK = [0.0, 100e-6]
WRITE = [-10e-6, 0.0, 10e-6]
# Commanded-state probabilities, rows follow CLOCK
P_HAT = [
    [0.5, 0.5, 0.5],
    [0.9, 0.5, 0.8],
]


def make_diagram(clock=CLOCK, write=WRITE, p_hat=P_HAT, n=100):
    grid = SweepGrid(clock_levels=clock, write_levels=write, trials_per_point=n, master_seed=3)
    estimates = [[bernoulli_estimate(int(round(p * n)), n) for p in row] for row in p_hat]
    return PhaseDiagram(grid=grid, estimates=estimates)


def test_lookup_at_nodes():
    diagram = make_diagram()
    for i, I_clock in enumerate(CLOCK):
        for j, I_write in enumerate(WRITE):
            assert probability_lookup(diagram, I_write, I_clock) == pytest.approx(P_HAT[i][j])

def test_lookup_bilinear_midpoint():
    diagram = make_diagram()
    value = probability_lookup(diagram, 5e-6, 50e-6)
    assert value == pytest.approx(np.mean([0.5, 0.5, 0.5, 0.8]))

def test_lookup_array_query():
    diagram = make_diagram()
    values = probability_lookup(diagram, np.array([0.0, 10e-6]), 100e-6)
    np.testing.assert_allclose(values, [0.5, 0.8])

def test_lookup_clamps_with_warning():
    diagram = make_diagram()
    with pytest.warns(LookupClampWarning):
        value = probability_lookup(diagram, 50e-6, 100e-6)
    assert value == pytest.approx(0.8)
    with pytest.warns(LookupClampWarning):
        value = probability_lookup(diagram, 0.0, 500e-6)
    assert value == pytest.approx(0.5)

def test_lookup_clamp_warning_collapses(caplog):
    diagram = make_diagram()
    with warnings.catch_warnings(record=True) as recorded:
        warnings.simplefilter("default")
        with caplog.at_level(logging.DEBUG, logger="sotneuron"):
            for I_write in (20e-6, 30e-6, -40e-6):
                probability_lookup(diagram, I_write, 100e-6)
    assert [type(w.message) for w in recorded] == [LookupClampWarning]
    clamped = [record for record in caplog.records if "Clamped lookup" in record.getMessage()]
    assert len(clamped) == 3
    assert "-4e-05" in clamped[-1].getMessage()

def test_lookup_descending_levels():
    ascending = make_diagram()
    descending = make_diagram(write=WRITE[::-1], p_hat=[row[::-1] for row in P_HAT])
    for I_write in (-7e-6, -1e-6, 3e-6, 9e-6):
        assert probability_lookup(descending, I_write, 70e-6) == pytest.approx(probability_lookup(ascending, I_write, 70e-6))

def test_lookup_single_clock_level():
    diagram = make_diagram(clock=[85e-6], p_hat=[[0.1, 0.5, 0.9]])
    assert probability_lookup(diagram, 5e-6, 85e-6) == pytest.approx(0.7)

def test_firing_probability_complements_negative_side():
    diagram = make_diagram()
    # P with probability 0.9 means AP with probability 0.1
    assert firing_probability(diagram, -10e-6, 100e-6) == pytest.approx(0.1)
    assert firing_probability(diagram, 10e-6, 100e-6) == pytest.approx(0.8)
    assert firing_probability(diagram, -5e-6, 100e-6) == pytest.approx(0.3)

def test_firing_probability_monotone_for_consistent_diagram():
    diagram = make_diagram(clock=[85e-6], p_hat=[[0.99, 0.9, 0.5, 0.9, 0.99]], write=[-10e-6, -5e-6, 0.0, 5e-6, 10e-6])
    values = firing_probability(diagram, np.linspace(-10e-6, 10e-6, 41), 85e-6)
    assert np.all(np.diff(values) >= 0)
    assert values[20] == pytest.approx(0.5)


# Files
# -----

def test_write_and_read(tmp_path):
    diagram = make_diagram()
    header = {"seed": 3, "version": "test"}
    csv_path, json_path = write_phase_diagram(diagram, tmp_path, header=header)
    assert csv_path == tmp_path / "phase_diagram.csv"
    assert json_path == tmp_path / "phase_diagram.json"
    assert csv_path.read_text().startswith("# {")

    restored = read_phase_diagram(csv_path)
    assert restored.grid == diagram.grid
    assert restored.estimates == diagram.estimates

    # Writing what was read gives the same bytes
    copy_csv, _ = write_phase_diagram(restored, tmp_path / "copy", header=header)
    assert copy_csv.read_bytes() == csv_path.read_bytes()

def test_failures_survive_files(tmp_path):
    diagram = make_diagram()
    diagram.estimates[1][2] = None
    diagram.failures.append(PointFailure(point_index=5, I_clock=100e-6, I_write=10e-6, message="diverged"))
    csv_path, _ = write_phase_diagram(diagram, tmp_path)
    restored = read_phase_diagram(csv_path)
    assert restored.estimates[1][2] is None
    assert restored.failures == diagram.failures

def test_read_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_phase_diagram(tmp_path / "missing.csv")

def test_read_incomplete_grid(tmp_path):
    path = tmp_path / "phase_diagram.csv"
    path.write_text(
        "I_clock,I_write,n,p_hat,ci95,successes,error\n"
        "0.0,0.0,10,0.5,0.3,5,\n"
        "0.0,1e-06,10,0.5,0.3,5,\n"
        "1e-05,0.0,10,0.5,0.3,5,\n"
    )
    with pytest.raises(FormatError):
        read_phase_diagram(path)

def test_read_garbage(tmp_path):
    path = tmp_path / "phase_diagram.csv"
    path.write_text("I_clock,I_write,n,p_hat,ci95,successes,error\nabc,0.0,10,0.5,0.3,5,\n")
    with pytest.raises(FormatError):
        read_phase_diagram(path)

def test_point_estimate_bounds():
    with pytest.raises(ValueError):
        PointEstimate(p_hat=1.5, n=10, ci95=0, successes=15)
