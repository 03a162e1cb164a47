"""Flat key-value configuration files.

Plain UTF-8 text with ``[section]`` headers and ``key = value`` lines;
``#`` and ``;`` start comments.  Unknown sections or keys are rejected
with the offending line number, and a resolved configuration can be
dumped back to canonical text (dump/parse round-trips to the identity
on resolved values).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constitutive import CouplingLaw, ForchheimerPolynomial
from .errors import ConfigError
from .grid import EDGES, NEUMANN, ROBIN, StructuredGrid
from .solver import ModelParameters, StepperConfig


def _parse_float_list(text):
    return tuple(float(tok) for tok in text.replace(",", " ").split())


_INITIAL_KINDS = ("constant", "cosine", "gaussian")

# section -> key -> (converter, default); REQUIRED means no default
REQUIRED = object()
_SCHEMA = {
    "model": {
        "lambda": (float, REQUIRED),
        "k2": (float, REQUIRED),
        "g_coeffs": (_parse_float_list, REQUIRED),
        "g_exps": (_parse_float_list, REQUIRED),
        "c_hat": (float, REQUIRED),
        "sigma": (float, REQUIRED),
        "phi": (float, 0.0),
        "alpha": (float, None),
    },
    "grid": {
        "nx": (int, REQUIRED),
        "ny": (int, REQUIRED),
        "lx": (float, 1.0),
        "ly": (float, 1.0),
        "bc_left": (str, NEUMANN),
        "bc_right": (str, ROBIN),
        "bc_bottom": (str, NEUMANN),
        "bc_top": (str, NEUMANN),
    },
    "initial": {
        "u0_kind": (str, "constant"),
        "u0_base": (float, 1.0),
        "u0_amplitude": (float, 0.0),
        "u0_modes_x": (int, 1),
        "u0_modes_y": (int, 0),
        "u0_center_x": (float, 0.5),
        "u0_center_y": (float, 0.5),
        "u0_width": (float, 0.1),
        "v0_kind": (str, "constant"),
        "v0_base": (float, 1.0),
        "v0_amplitude": (float, 0.0),
        "v0_modes_x": (int, 1),
        "v0_modes_y": (int, 0),
        "v0_center_x": (float, 0.5),
        "v0_center_y": (float, 0.5),
        "v0_width": (float, 0.1),
    },
    "stepper": {
        "dt": (float, REQUIRED),
        "T": (float, REQUIRED),
        "tol_coupling": (float, 1e-10),
        "tol_picard": (float, 1e-12),
        "max_coupling_iters": (int, 60),
        "max_picard_iters": (int, 120),
        "omega": (float, 0.8),
        "linear_rtol": (float, 1e-13),
        "max_halvings": (int, 5),
    },
    "io": {
        "output_dir": (str, "out"),
        "cadence": (int, 1),
    },
}


@dataclass
class ResolvedConfig:
    """Validated configuration with constructed domain objects."""

    values: dict  # section -> key -> resolved primitive value
    params: ModelParameters
    grid: StructuredGrid
    stepper: StepperConfig
    warnings: list

    @property
    def output_dir(self):
        return self.values["io"]["output_dir"]

    @property
    def cadence(self):
        return self.values["io"]["cadence"]

    def initial_fields(self):
        """Build (u0, v0) cell arrays; u0 is clamped to be nonnegative."""
        u0 = _build_field(self.grid, self.values["initial"], "u0")
        v0 = _build_field(self.grid, self.values["initial"], "v0")
        return np.maximum(u0, 0.0), v0


def _build_field(grid, initial, prefix):
    kind = initial[f"{prefix}_kind"]
    base = initial[f"{prefix}_base"]
    amp = initial[f"{prefix}_amplitude"]
    x, y = grid.cell_centers()
    if kind == "constant":
        return np.full((grid.nx, grid.ny), base)
    if kind == "cosine":
        mx = initial[f"{prefix}_modes_x"]
        my = initial[f"{prefix}_modes_y"]
        return base + amp * np.cos(math.pi * mx * x / grid.lx) * np.cos(
            math.pi * my * y / grid.ly
        )
    if kind == "gaussian":
        cx = initial[f"{prefix}_center_x"] * grid.lx
        cy = initial[f"{prefix}_center_y"] * grid.ly
        width = initial[f"{prefix}_width"]
        return base + amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width**2)
    raise ConfigError(f"unknown initial field kind {kind!r} for {prefix}")


def _read_raw(path):
    """Tokenize the file into {section: {key: (value_text, line_no)}}."""
    raw = {}
    section = None
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].split(";", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown section [{section}]")
            raw.setdefault(section, {})
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        if section is None:
            raise ConfigError(f"{path}:{lineno}: key outside any [section]")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _SCHEMA[section]:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r} in [{section}]")
        if key in raw[section]:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[section][key] = (value, lineno)
    return raw


def parse_config(path, strict=False):
    """Parse, validate and resolve a configuration file.

    Raises ConfigError on structural/typing problems and on invariant
    violations; existence-theory admissibility issues are collected as
    warnings (or errors when ``strict``).
    """
    raw = _read_raw(path)
    values = {}
    for section, keys in _SCHEMA.items():
        values[section] = {}
        for key, (convert, default) in keys.items():
            if section in raw and key in raw[section]:
                text, lineno = raw[section][key]
                try:
                    values[section][key] = convert(text)
                except ValueError as err:
                    raise ConfigError(
                        f"{path}:{lineno}: bad value for {key!r}: {err}"
                    ) from err
            elif default is REQUIRED:
                raise ConfigError(f"{path}: missing required key [{section}] {key}")
            else:
                values[section][key] = default

    return resolve(values, strict=strict, source=str(path))


def resolve(values, strict=False, source="<config>"):
    """Construct domain objects from primitive values."""
    model = values["model"]
    gridv = values["grid"]
    stepv = values["stepper"]
    initial = values["initial"]

    for prefix in ("u0", "v0"):
        if initial[f"{prefix}_kind"] not in _INITIAL_KINDS:
            raise ConfigError(
                f"{source}: {prefix}_kind must be one of {_INITIAL_KINDS}"
            )

    try:
        poly = ForchheimerPolynomial(model["g_coeffs"], model["g_exps"])
        coupling = CouplingLaw(model["c_hat"], model["sigma"])
    except ValueError as err:
        raise ConfigError(f"{source}: {err}") from err

    tags = {edge: gridv[f"bc_{edge}"].lower() for edge in EDGES}
    for edge, tag in tags.items():
        if tag not in (NEUMANN, ROBIN):
            raise ConfigError(f"{source}: bc_{edge} must be 'neumann' or 'robin'")
    all_neumann = all(tag == NEUMANN for tag in tags.values())
    if all_neumann and model["phi"] != 0.0:
        raise ConfigError(f"{source}: phi must be 0 for an all-Neumann boundary")
    try:
        grid = StructuredGrid(
            nx=gridv["nx"], ny=gridv["ny"], lx=gridv["lx"], ly=gridv["ly"],
            edge_tags=tags, robin_phi=model["phi"],
            allow_all_neumann=all_neumann,
        )
        params = ModelParameters(
            lam=model["lambda"], k2=model["k2"], poly=poly, coupling=coupling,
            t_final=stepv["T"], alpha=model["alpha"],
        )
        stepper = StepperConfig(
            dt=stepv["dt"],
            tol_coupling=stepv["tol_coupling"],
            tol_picard=stepv["tol_picard"],
            max_coupling_iters=stepv["max_coupling_iters"],
            max_picard_iters=stepv["max_picard_iters"],
            omega=stepv["omega"],
            linear_rtol=stepv["linear_rtol"],
            max_halvings=stepv["max_halvings"],
        )
    except ValueError as err:
        raise ConfigError(f"{source}: {err}") from err

    resolved_values = {s: dict(v) for s, v in values.items()}
    resolved_values["model"]["alpha"] = params.alpha

    issues = params.admissibility_issues()
    if strict and issues:
        raise ConfigError(f"{source}: inadmissible parameters: {'; '.join(issues)}")
    return ResolvedConfig(
        values=resolved_values, params=params, grid=grid, stepper=stepper,
        warnings=issues,
    )


def dump_config(resolved):
    """Render a resolved configuration as canonical config text."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            value = resolved.values[section][key]
            if isinstance(value, tuple):
                text = ", ".join(repr(x) for x in value)
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{key} = {text}")
        lines.append("")
    return "\n".join(lines)
