"""Manufactured-solution verification harness.

Given analytic fields (u*, v*) — sympy expressions in x, y, t — the
residual source terms

    S_u = d/dt(u*^lam) - div(K(|grad u*|) grad u*) + b(u* - v*)
    S_v = d/dt v*     - K2 lap v*                 - b(u* - v*)

are added to the right-hand sides so that (u*, v*) solves the modified
system, which turns discretization error into a measurable quantity.
The divergence term is expanded by the chain rule so only pointwise
derivatives of u* (from sympy) and the conductivity and its slope (from
the drag polynomial) are needed; no closed form of K is required.

Manufactured solutions must be smooth, and strictly positive when
lam < 1; to keep homogeneous-Neumann walls exact, pick fields whose
normal derivative vanishes on the boundary (e.g. products of
cos(pi k x / Lx) factors).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from . import solver

_X, _Y, _T = sp.symbols("x y t")
_GRAD_EPS = 1e-14


def _compile(expr):
    return sp.lambdify((_X, _Y, _T), expr, modules="numpy")


def _broadcast(fn, x, y, t):
    return np.broadcast_to(np.asarray(fn(x, y, t), dtype=float), x.shape).copy()


@dataclass(frozen=True)
class ManufacturedSolution:
    """Analytic reference pair with all derivatives precompiled."""

    u_expr: object
    v_expr: object

    def __post_init__(self):
        u = sp.sympify(self.u_expr)
        v = sp.sympify(self.v_expr)
        object.__setattr__(self, "u_expr", u)
        object.__setattr__(self, "v_expr", v)
        funcs = {
            "u": u, "u_t": sp.diff(u, _T),
            "u_x": sp.diff(u, _X), "u_y": sp.diff(u, _Y),
            "u_xx": sp.diff(u, _X, 2), "u_yy": sp.diff(u, _Y, 2),
            "u_xy": sp.diff(u, _X, _Y),
            "v": v, "v_t": sp.diff(v, _T),
            "v_xx": sp.diff(v, _X, 2), "v_yy": sp.diff(v, _Y, 2),
        }
        object.__setattr__(self, "_fn", {k: _compile(e) for k, e in funcs.items()})

    def field(self, name, x, y, t):
        return _broadcast(self._fn[name], x, y, t)

    def sources(self, grid, params):
        """Callables (t -> S_u array, t -> S_v array) on the grid cells."""
        x, y = grid.cell_centers()
        lam = params.lam
        poly = params.poly
        coupling = params.coupling

        def source_u(t):
            f = {k: self.field(k, x, y, t) for k in
                 ("u", "u_t", "u_x", "u_y", "u_xx", "u_yy", "u_xy")}
            v = self.field("v", x, y, t)
            if lam == 1.0:
                time_term = f["u_t"]
            else:
                time_term = lam * f["u"] ** (lam - 1.0) * f["u_t"]
            q = np.hypot(f["u_x"], f["u_y"])
            k_val = poly.conductivity(q)
            lap = f["u_xx"] + f["u_yy"]
            # chain rule: div(K(q) grad u) = K lap u + K'(q) (grad q . grad u)
            safe_q = np.maximum(q, _GRAD_EPS)
            qx = (f["u_x"] * f["u_xx"] + f["u_y"] * f["u_xy"]) / safe_q
            qy = (f["u_x"] * f["u_xy"] + f["u_y"] * f["u_yy"]) / safe_q
            slope = np.where(q > _GRAD_EPS, poly.conductivity_slope(safe_q), 0.0)
            div_term = k_val * lap + slope * (qx * f["u_x"] + qy * f["u_y"])
            return time_term - div_term + coupling(f["u"] - v)

        def source_v(t):
            u = self.field("u", x, y, t)
            v_t = self.field("v_t", x, y, t)
            v_lap = self.field("v_xx", x, y, t) + self.field("v_yy", x, y, t)
            v = self.field("v", x, y, t)
            return v_t - params.k2 * v_lap - coupling(u - v)

        return source_u, source_v


HEAT_LIMIT = ManufacturedSolution(
    "exp(-pi**2*t)*cos(pi*x)", "exp(-pi**2*t)*cos(pi*y)"
)
SMOOTH_POSITIVE = ManufacturedSolution(
    "2 + exp(-t)*cos(pi*x)*cos(pi*y)/2", "2 + 3*exp(-t)*cos(pi*y)/10"
)


@dataclass(frozen=True)
class MmsErrors:
    err_u: float
    err_v: float


def l2_error(grid, numeric, exact):
    return float(np.sqrt(grid.volume_integral((numeric - exact) ** 2)))


def mms_run(grid, params, cfg, manufactured):
    """Run the solver against manufactured sources; L2 errors at t_final."""
    x, y = grid.cell_centers()
    u0 = manufactured.field("u", x, y, 0.0)
    v0 = manufactured.field("v", x, y, 0.0)
    result = solver.run(
        grid, params, cfg, u0, v0, cadence=10**9,
        sources=manufactured.sources(grid, params),
    )
    t_end, u_end, _, v_end = result.snapshots[-1]
    return MmsErrors(
        err_u=l2_error(grid, u_end, manufactured.field("u", x, y, t_end)),
        err_v=l2_error(grid, v_end, manufactured.field("v", x, y, t_end)),
    )


@dataclass(frozen=True)
class LadderLevel:
    label: str
    err_u: float
    err_v: float
    order_u: float
    order_v: float


def _orders(levels, errs, ratios):
    out = []
    for i, err in enumerate(errs):
        if i == 0:
            out.append(float("nan"))
        else:
            out.append(float(np.log(errs[i - 1] / err) / np.log(ratios[i])))
    return out


def spatial_ladder(make_grid, params, manufactured, nx_levels, dt_coarse, stepper_kwargs=None):
    """Refine the grid with dt scaled like dx^2 (implicit-Euler balance).

    ``make_grid(nx)`` builds the grid for one level; errors are measured
    against the manufactured solution at t_final.
    """
    kwargs = dict(stepper_kwargs or {})
    rows = []
    errs_u, errs_v, ratios = [], [], []
    for i, nx in enumerate(nx_levels):
        scale = (nx_levels[0] / nx) ** 2
        cfg = solver.StepperConfig(dt=dt_coarse * scale, **kwargs)
        errors = mms_run(make_grid(nx), params, cfg, manufactured)
        errs_u.append(errors.err_u)
        errs_v.append(errors.err_v)
        ratios.append(1.0 if i == 0 else nx / nx_levels[i - 1])
    for label, eu, ev, ou, ov in zip(
        (f"nx={nx}" for nx in nx_levels), errs_u, errs_v,
        _orders(nx_levels, errs_u, ratios), _orders(nx_levels, errs_v, ratios),
    ):
        rows.append(LadderLevel(label, eu, ev, ou, ov))
    return rows


def temporal_ladder(grid, params, manufactured, dts, ref_refinement=8, stepper_kwargs=None):
    """Coarsen dt on a fixed grid against a fine-dt reference run.

    The reference run (dt = min(dts)/ref_refinement, same grid) removes
    the common spatial error, so the measured orders are purely
    temporal.
    """
    kwargs = dict(stepper_kwargs or {})
    sources = manufactured.sources(grid, params)
    x, y = grid.cell_centers()
    u0 = manufactured.field("u", x, y, 0.0)
    v0 = manufactured.field("v", x, y, 0.0)

    def final_fields(dt):
        cfg = solver.StepperConfig(dt=dt, **kwargs)
        result = solver.run(grid, params, cfg, u0, v0, cadence=10**9, sources=sources)
        _, u_end, _, v_end = result.snapshots[-1]
        return u_end, v_end

    u_ref, v_ref = final_fields(min(dts) / ref_refinement)
    errs_u, errs_v, ratios = [], [], []
    for i, dt in enumerate(dts):
        u_end, v_end = final_fields(dt)
        errs_u.append(l2_error(grid, u_end, u_ref))
        errs_v.append(l2_error(grid, v_end, v_ref))
        ratios.append(1.0 if i == 0 else dts[i - 1] / dt)
    rows = []
    for label, eu, ev, ou, ov in zip(
        (f"dt={dt:g}" for dt in dts), errs_u, errs_v,
        _orders(dts, errs_u, ratios), _orders(dts, errs_v, ratios),
    ):
        rows.append(LadderLevel(label, eu, ev, ou, ov))
    return rows
