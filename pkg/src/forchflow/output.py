"""Run artifact writers: snapshots, ledger CSV, constants, manifest.

All numeric text uses ``repr`` (shortest round-trip form), so reruns of
the same configuration produce byte-identical files.
"""

from __future__ import annotations

import json
import os
import time

import numpy as np

from . import __version__
from .energy import EnergyRow


def snapshot_filename(index):
    return f"snapshot_{index:05d}.txt"


def write_snapshot(path, grid, t, u, w, v):
    """Plain-text snapshot: `nx ny dx dy t` header, then u, w, v row-major."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{grid.nx} {grid.ny} {grid.dx!r} {grid.dy!r} {float(t)!r}\n")
        for field in (u, w, v):
            for row in np.asarray(field):
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`; returns (meta dict, u, w, v)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        nx, ny = int(header[0]), int(header[1])
        meta = {"nx": nx, "ny": ny, "dx": float(header[2]),
                "dy": float(header[3]), "t": float(header[4])}
        data = np.loadtxt(fh).reshape(3, nx, ny)
    return meta, data[0], data[1], data[2]


def write_ledger(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(EnergyRow.CSV_HEADER + "\n")
        for row in rows:
            fh.write(row.csv_line() + "\n")


def read_ledger(path):
    """Read a ledger CSV back into EnergyRow objects."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != EnergyRow.CSV_HEADER:
            raise ValueError(f"{path}: unexpected ledger header {header!r}")
        for line in fh:
            parts = line.strip().split(",")
            rows.append(
                EnergyRow(
                    *(float(x) for x in parts[:8]),
                    coupling_iters=int(parts[8]),
                )
            )
    return rows


def write_constants(path, constants):
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in constants.as_dict().items():
            if isinstance(value, float):
                fh.write(f"{key} = {float(value)!r}\n")
            else:
                fh.write(f"{key} = {value}\n")


def read_constants_values(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            key, _, text = line.partition("=")
            key, text = key.strip(), text.strip()
            if key == "violations":
                values[key] = tuple(v for v in text.split(";") if v)
            else:
                values[key] = float(text)
    return values


def write_gnuplot_summary(path, rows):
    """Three-column (t, V, V_bound) block for quick external plotting."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# t V V_bound\n")
        for row in rows:
            fh.write(f"{float(row.t)!r} {float(row.V)!r} {float(row.V_bound)!r}\n")


class RunSink:
    """Streams run outputs to an output directory as they are produced."""

    def __init__(self, out_dir, grid):
        self.out_dir = out_dir
        self.grid = grid
        self._snapshot_index = 0
        self._ledger = open(
            os.path.join(out_dir, "ledger.csv"), "w", encoding="utf-8"
        )
        self._ledger.write(EnergyRow.CSV_HEADER + "\n")

    def on_ledger_row(self, row):
        self._ledger.write(row.csv_line() + "\n")
        self._ledger.flush()

    def on_snapshot(self, t, u, w, v):
        path = os.path.join(self.out_dir, snapshot_filename(self._snapshot_index))
        write_snapshot(path, self.grid, t, u, w, v)
        self._snapshot_index += 1

    def close(self):
        self._ledger.close()


def write_manifest(path, config_path, resolved, status, timings=None):
    payload = {
        "tool": "forchflow",
        "version": __version__,
        "config_path": str(config_path),
        "resolved": {s: _jsonable(v) for s, v in resolved.values.items()},
        "status": status,
        "timings": timings or {},
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(mapping):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in mapping.items()}
