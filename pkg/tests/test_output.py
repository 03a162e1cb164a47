"""Artifact writers and readers round-trip exactly (repr-formatted)."""

import json

import numpy as np
import pytest

from forchflow import config, energy, output
from forchflow.grid import StructuredGrid

from test_config import GOOD, write


def test_snapshot_round_trip(tmp_path):
    g = StructuredGrid(5, 4, robin_phi=0.1)
    rng = np.random.default_rng(2)
    u = rng.standard_normal((5, 4))
    w = rng.standard_normal((5, 4))
    v = rng.standard_normal((5, 4))
    path = tmp_path / output.snapshot_filename(3)
    assert path.name == "snapshot_00003.txt"
    output.write_snapshot(path, g, 0.125, u, w, v)
    meta, u2, w2, v2 = output.read_snapshot(path)
    assert meta["nx"] == 5 and meta["ny"] == 4
    assert meta["t"] == 0.125
    assert meta["dx"] == g.dx and meta["dy"] == g.dy
    np.testing.assert_array_equal(u2, u)  # repr round-trips bit-exactly
    np.testing.assert_array_equal(w2, w)
    np.testing.assert_array_equal(v2, v)


def _rows():
    return [
        energy.EnergyRow(t=0.0, int_u_alpha=1.5, int_v_sq=0.25,
                         int_grad_u_weighted=0.1, int_grad_v_sq=0.2,
                         V=2.75, Lambda=1.7, V_bound=2.75, coupling_iters=0),
        energy.EnergyRow(t=0.1, int_u_alpha=1.4, int_v_sq=0.35,
                         int_grad_u_weighted=0.09, int_grad_v_sq=0.21,
                         V=2.7500001, Lambda=1.65, V_bound=3.1, coupling_iters=4),
    ]


def test_ledger_round_trip(tmp_path):
    path = tmp_path / "ledger.csv"
    rows = _rows()
    output.write_ledger(path, rows)
    rows2 = output.read_ledger(path)
    assert rows2 == rows


def test_ledger_header_validated(tmp_path):
    path = tmp_path / "ledger.csv"
    path.write_text("t,wrong,header\n")
    with pytest.raises(ValueError, match="header"):
        output.read_ledger(path)


def test_constants_round_trip(tmp_path):
    from forchflow.constitutive import CouplingLaw, ForchheimerPolynomial
    from forchflow.solver import ModelParameters

    params = ModelParameters(
        lam=0.8, k2=1.0, poly=ForchheimerPolynomial((1.0, 1.0), (0.0, 1.0)),
        coupling=CouplingLaw(1.0, 0.5), t_final=0.5,
    )
    constants = energy.compute_constants(params, area=1.0)
    path = tmp_path / "constants.txt"
    output.write_constants(path, constants)
    values = output.read_constants_values(path)
    for key, expected in constants.as_dict().items():
        if key == "violations":
            continue
        assert values[key] == expected  # repr round-trip is exact


def test_gnuplot_summary(tmp_path):
    path = tmp_path / "summary.dat"
    output.write_gnuplot_summary(path, _rows())
    lines = path.read_text().splitlines()
    assert lines[0] == "# t V V_bound"
    assert len(lines) == 3
    assert [float(tok) for tok in lines[1].split()] == [0.0, 2.75, 2.75]


def test_run_sink_streams(tmp_path):
    g = StructuredGrid(4, 4, robin_phi=0.1)
    sink = output.RunSink(str(tmp_path), g)
    for row in _rows():
        sink.on_ledger_row(row)
    sink.on_snapshot(0.0, np.ones((4, 4)), np.ones((4, 4)), np.ones((4, 4)))
    sink.close()
    assert (tmp_path / "ledger.csv").exists()
    assert (tmp_path / "snapshot_00000.txt").exists()
    assert len(output.read_ledger(tmp_path / "ledger.csv")) == 2


def test_manifest(tmp_path):
    resolved = config.parse_config(write(tmp_path, GOOD))
    path = tmp_path / "manifest.json"
    output.write_manifest(path, "case.cfg", resolved, "completed",
                          timings={"run_s": 1.5})
    payload = json.loads(path.read_text())
    assert payload["status"] == "completed"
    assert payload["tool"] == "forchflow"
    assert payload["resolved"]["model"]["lambda"] == 0.8
    assert payload["timings"]["run_s"] == 1.5
