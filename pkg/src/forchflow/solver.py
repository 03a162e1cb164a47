"""Time integration of the coupled active/passive density system.

Each time step alternates two implicit-Euler sub-solves in a damped
fixed-point loop:

  * active density u: degenerate nonlinear diffusion with the
    Forchheimer conductivity, handled by an inner Picard iteration that
    freezes the conductivity and linearizes the u^lam time term;
  * passive density v: linear diffusion with homogeneous Neumann walls.

The exchange term b(u - v) is evaluated once per coupling iteration and
used with opposite signs in both sub-solves, so that summing the two
discrete equations cancels it exactly; with all-Neumann walls this
makes int(u^lam + v) conserved to solver tolerance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import energy, linalg
from .constitutive import CouplingLaw, ForchheimerPolynomial
from .errors import NumericError, StepError
from .grid import ROBIN, StructuredGrid

POSITIVITY_FLOOR = 1e-8


@dataclass(frozen=True)
class ModelParameters:
    """Physical parameters of the coupled system.

    ``alpha`` defaults to 2 - delta, the smallest admissible energy
    exponent; ``phi_modulation`` optionally scales the Robin
    coefficient in time.
    """

    lam: float
    k2: float
    poly: ForchheimerPolynomial
    coupling: CouplingLaw
    t_final: float
    alpha: float = None
    phi_modulation: object = None

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("lam must lie in (0, 1]")
        if self.k2 <= 0.0:
            raise ValueError("passive diffusivity must be positive")
        if self.t_final < 0.0:
            raise ValueError("final time must be nonnegative")
        if self.alpha is None:
            object.__setattr__(self, "alpha", 2.0 - self.delta)
        if not (2.0 - self.delta) - 1e-12 <= self.alpha <= 2.0 + 1e-12:
            raise ValueError("alpha must lie in [2 - delta, 2]")

    @property
    def delta(self) -> float:
        return 1.0 - self.lam

    @property
    def envelope_exponent(self) -> float:
        return self.poly.envelope_exponent

    def admissibility_issues(self):
        """Existence-theory hypotheses that this parameter set violates."""
        issues = []
        a = self.envelope_exponent
        if not a > self.delta:
            issues.append(f"requires a > delta, got a={a:.6g}, delta={self.delta:.6g}")
        if not 0.0 < a < 1.0:
            issues.append(f"requires a in (0, 1), got a={a:.6g}")
        if not self.coupling.exponent <= self.alpha / 2.0:
            issues.append(
                f"requires sigma <= alpha/2, got sigma={self.coupling.exponent:.6g},"
                f" alpha={self.alpha:.6g}"
            )
        return issues

    def check_admissibility(self, strict=False):
        issues = self.admissibility_issues()
        for issue in issues:
            if strict:
                raise ValueError(f"inadmissible parameters: {issue}")
            warnings.warn(f"inadmissible parameters: {issue}", stacklevel=2)
        return issues


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    tol_coupling: float = 1e-10
    tol_picard: float = 1e-12
    max_coupling_iters: int = 60
    max_picard_iters: int = 120
    omega: float = 0.8
    linear_rtol: float = 1e-13
    max_halvings: int = 5
    max_linear_iters: int = 20000

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.tol_coupling <= 0.0 or self.tol_picard <= 0.0:
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.omega <= 1.0:
            raise ValueError("relaxation factor must lie in (0, 1]")


@dataclass
class SimulationState:
    t: float
    u: np.ndarray
    w: np.ndarray  # = u**lam, the evolved variable of the active equation
    v: np.ndarray

    @classmethod
    def from_initial(cls, u0, v0, lam):
        u0 = np.asarray(u0, dtype=float).copy()
        v0 = np.asarray(v0, dtype=float).copy()
        if lam < 1.0:
            u0 = np.maximum(u0, 0.0)
        return cls(t=0.0, u=u0, w=_power(u0, lam), v=v0)


@dataclass
class StepDiagnostics:
    coupling_iters: int = 0
    picard_iters: list = field(default_factory=list)
    update_norms: list = field(default_factory=list)
    exchange_residuals: list = field(default_factory=list)


def _power(u, lam):
    if lam == 1.0:
        return u.copy()
    return np.abs(u) ** lam * np.sign(u)


def _degenerate_factor(u, lam):
    """Frozen-factor linearization coefficient (max(u, floor))^(lam-1)."""
    if lam == 1.0:
        return np.ones_like(u)
    return np.maximum(u, POSITIVITY_FLOOR) ** (lam - 1.0)


class StencilOperator:
    """Five-point -div(k grad .) operator plus a per-cell diagonal term.

    Stores face transmissibilities directly and applies them with array
    slicing, which is several times faster than a generic sparse matvec
    on these structured grids.  Exposes the same ``n`` / ``matvec`` /
    ``diagonal`` surface that the Krylov solvers consume.
    """

    def __init__(self, nx, ny, cx, cy, diag_extra):
        self.nx = nx
        self.ny = ny
        self.cx = cx  # (nx-1, ny) interior x-face transmissibilities
        self.cy = cy  # (nx, ny-1) interior y-face transmissibilities
        self.diag_extra = diag_extra.reshape(nx, ny)
        self.n = nx * ny

    def matvec(self, x):
        x2 = x.reshape(self.nx, self.ny)
        y = self.diag_extra * x2
        dx = self.cx * (x2[:-1, :] - x2[1:, :])
        y[:-1, :] += dx
        y[1:, :] -= dx
        dy = self.cy * (x2[:, :-1] - x2[:, 1:])
        y[:, :-1] += dy
        y[:, 1:] -= dy
        return y.ravel()

    def diagonal(self):
        d = self.diag_extra.copy()
        d[:-1, :] += self.cx
        d[1:, :] += self.cx
        d[:, :-1] += self.cy
        d[:, 1:] += self.cy
        return d.ravel()

    def to_dense(self):
        eye = np.eye(self.n)
        return np.column_stack([self.matvec(eye[:, j]) for j in range(self.n)])


def _assemble_diffusion(grid, kx, ky, diag_extra):
    """Operator for -div(k grad .) plus a per-cell diagonal term.

    ``kx``/``ky`` are conductivities on interior x-/y-faces; boundary
    faces carry no flux here (zero-flux walls; Robin enters through
    ``diag_extra``).
    """
    cx = kx * grid.dy / grid.dx
    cy = ky * grid.dx / grid.dy
    return StencilOperator(grid.nx, grid.ny, cx, cy, diag_extra)


def _robin_diagonal(grid, params, factor, t_new):
    """Diagonal contributions phi * (u^k)^(lam-1) * face_length on outflow cells."""
    diag = np.zeros(grid.n_cells)
    phi = grid.robin_phi
    if params.phi_modulation is not None:
        phi = phi * float(params.phi_modulation(t_new))
    if phi == 0.0:
        return diag
    flat_factor = factor.ravel()
    for edge in grid.robin_edges:
        cells = grid.edge_cell_indices(edge)
        diag[cells] += phi * flat_factor[cells] * grid.edge_face_length(edge)
    return diag


def solve_active(grid, params, cfg, u_start, w_old, exchange, dt, t_new,
                 source=None, tol=None):
    """One implicit-Euler solve of the active sub-problem by Picard iteration.

    At Picard iterate k the conductivity uses the face gradients of u^k,
    the time term uses the frozen-factor linearization of u^lam, and the
    Robin flux uses the same frozen factor; the exchange array is held
    fixed (it is refreshed by the coupling loop).  Exact backward Euler
    for lam = 1.

    Returns (u_new, picard_iterations).
    """
    vol = grid.cell_area
    tol = cfg.tol_picard if tol is None else tol
    # A loose Picard pass does not need the linear systems any tighter
    # than the nonlinear update it is about to make.
    rtol = max(cfg.linear_rtol, min(1e-2 * tol, 1e-6))
    rhs_base = vol / dt * w_old.ravel() - vol * exchange.ravel()
    if source is not None:
        rhs_base = rhs_base + vol * source.ravel()

    u_k = u_start.copy()
    for k in range(1, cfg.max_picard_iters + 1):
        qx, qy = grid.face_gradient_magnitude(u_k)
        kx = params.poly.conductivity(qx[1:-1, :])
        ky = params.poly.conductivity(qy[:, 1:-1])
        factor = _degenerate_factor(u_k, params.lam)
        diag = vol / dt * factor.ravel() + _robin_diagonal(grid, params, factor, t_new)
        A = _assemble_diffusion(grid, kx, ky, diag)
        x, _ = linalg.solve(
            A, rhs_base, x0=u_k.ravel(), rtol=rtol,
            max_iter=cfg.max_linear_iters, symmetric=True,
        )
        u_next = x.reshape(grid.nx, grid.ny)
        change = float(np.max(np.abs(u_next - u_k)))
        u_k = u_next
        if change <= tol:
            return u_k, k
    raise StepError(
        "active sub-problem Picard iteration stalled; reduce dt", change
    )


def solve_passive(grid, params, cfg, v_old, exchange, dt, source=None):
    """Implicit-Euler linear diffusion solve for the passive density."""
    vol = grid.cell_area
    rhs = vol / dt * v_old.ravel() + vol * exchange.ravel()
    if source is not None:
        rhs = rhs + vol * source.ravel()
    n_ifaces_x = (grid.nx - 1, grid.ny)
    n_ifaces_y = (grid.nx, grid.ny - 1)
    kx = np.full(n_ifaces_x, params.k2)
    ky = np.full(n_ifaces_y, params.k2)
    diag = np.full(grid.n_cells, vol / dt)
    A = _assemble_diffusion(grid, kx, ky, diag)
    x, _ = linalg.solve(
        A, rhs, x0=v_old.ravel(), rtol=cfg.linear_rtol,
        max_iter=cfg.max_linear_iters, symmetric=True,
    )
    return x.reshape(grid.nx, grid.ny)


def coupled_step(grid, params, cfg, state, dt=None, sources=None):
    """Advance the coupled pair by one step of size dt.

    Damped fixed-point loop: freeze the exchange term at the current
    iterate pair, solve the active then the passive sub-problem, relax,
    repeat.  Convergence when either the exchange array is reproduced
    (which detects decoupled systems in a single iteration) or the
    combined candidate update norm falls below the tolerance.  The
    accepted fields are the unrelaxed candidates of the final iteration
    so that both sub-solves share one exchange array exactly.

    Returns (new_state, StepDiagnostics).
    """
    dt = cfg.dt if dt is None else dt
    t_new = state.t + dt
    source_u = source_v = None
    if sources is not None:
        source_u = sources[0](t_new)
        source_v = sources[1](t_new)

    u_iter = state.u.copy()
    v_iter = state.v.copy()
    diag = StepDiagnostics()
    u_new = v_new = None
    # While the coupling residual is large the inner Picard loop only
    # needs to resolve the sub-problem to a matching accuracy; the
    # iteration that is finally accepted is re-solved at full tolerance.
    picard_tol = max(cfg.tol_picard, 1e-4)
    for m in range(1, cfg.max_coupling_iters + 1):
        exchange = np.asarray(params.coupling(u_iter - v_iter))
        u_cand, picard = solve_active(
            grid, params, cfg, u_iter, state.w, exchange, dt, t_new, source_u,
            tol=picard_tol,
        )
        v_cand = solve_passive(grid, params, cfg, state.v, exchange, dt, source_v)
        diag.picard_iters.append(picard)

        exch_res = float(np.max(np.abs(params.coupling(u_cand - v_cand) - exchange)))
        update = float(np.max(np.abs(u_cand - u_iter)) + np.max(np.abs(v_cand - v_iter)))
        diag.exchange_residuals.append(exch_res)
        diag.update_norms.append(update)
        diag.coupling_iters = m
        if exch_res <= cfg.tol_coupling or update <= cfg.tol_coupling:
            if picard_tol > cfg.tol_picard:
                u_cand, extra = solve_active(
                    grid, params, cfg, u_cand, state.w, exchange, dt, t_new,
                    source_u,
                )
                diag.picard_iters[-1] += extra
            u_new, v_new = u_cand, v_cand
            break
        picard_tol = max(cfg.tol_picard, min(picard_tol, 1e-2 * exch_res))
        u_iter = cfg.omega * u_cand + (1.0 - cfg.omega) * u_iter
        v_iter = cfg.omega * v_cand + (1.0 - cfg.omega) * v_iter
    else:
        raise StepError(
            f"coupling loop exceeded {cfg.max_coupling_iters} iterations "
            f"(update norms {diag.update_norms[-3:]})",
            diag.update_norms[-1],
        )

    if params.lam < 1.0:
        u_new = np.maximum(u_new, 0.0)
        v_new = np.maximum(v_new, 0.0)
    new_state = SimulationState(t=t_new, u=u_new, w=_power(u_new, params.lam), v=v_new)
    return new_state, diag


@dataclass
class RunResult:
    times: list
    ledger: list
    snapshots: list  # (t, u, w, v) at the configured cadence
    constants: energy.ConstantsLedger
    diagnostics: list
    completed: bool = True


def run(grid, params, cfg, u0, v0, cadence=1, sink=None, sources=None):
    """Integrate from t = 0 to t = t_final with fixed nominal dt.

    A failed step is retried with halved dt (recursively, up to
    ``cfg.max_halvings``); the ledger and snapshots are sampled on the
    nominal step boundaries only.  ``sink``, when given, receives
    ``on_ledger_row(row)`` and ``on_snapshot(t, u, w, v)`` callbacks as
    soon as the data exists, so a crash still leaves partial outputs.

    Returns a RunResult; on step failure the partial result is attached
    to the raised StepError as ``partial_result``.
    """
    state = SimulationState.from_initial(u0, v0, params.lam)
    constants = energy.compute_constants(params, grid.area)
    n_steps = int(round(params.t_final / cfg.dt)) if params.t_final > 0.0 else 0
    if n_steps > 0 and abs(n_steps * cfg.dt - params.t_final) > 1e-9 * params.t_final:
        raise ValueError("t_final must be an integer multiple of dt")

    result = RunResult([], [], [], constants, [])

    def record(state, diag=None):
        iters = diag.coupling_iters if diag is not None else 0
        row = energy.evaluate_functionals(grid, params, state.u, state.v, t=state.t)
        v0_value = result.ledger[0].V if result.ledger else row.V
        row = energy.EnergyRow(
            **{
                **row.__dict__,
                "V_bound": v0_value * np.exp(constants.c3 * state.t),
                "coupling_iters": iters,
            }
        )
        result.times.append(state.t)
        result.ledger.append(row)
        if diag is not None:
            result.diagnostics.append(diag)
        if sink is not None:
            sink.on_ledger_row(row)
        step_index = len(result.times) - 1
        if step_index % max(cadence, 1) == 0 or step_index == n_steps:
            result.snapshots.append((state.t, state.u.copy(), state.w.copy(), state.v.copy()))
            if sink is not None:
                sink.on_snapshot(state.t, state.u, state.w, state.v)

    def substep(state, dt, depth):
        try:
            new_state, diag = coupled_step(grid, params, cfg, state, dt=dt, sources=sources)
            return new_state, diag
        except StepError:
            if depth >= cfg.max_halvings:
                raise
            mid, diag_a = substep(state, 0.5 * dt, depth + 1)
            end, diag_b = substep(mid, 0.5 * dt, depth + 1)
            merged = StepDiagnostics(
                coupling_iters=diag_a.coupling_iters + diag_b.coupling_iters,
                picard_iters=diag_a.picard_iters + diag_b.picard_iters,
                update_norms=diag_a.update_norms + diag_b.update_norms,
                exchange_residuals=diag_a.exchange_residuals + diag_b.exchange_residuals,
            )
            return end, merged

    record(state)
    try:
        for _ in range(n_steps):
            state, diag = substep(state, cfg.dt, 0)
            record(state, diag)
    except NumericError as err:
        result.completed = False
        err.partial_result = result
        raise
    return result
