"""Coupled stepper tests: dense oracles, conservation, decoupling.

The lam = 1 step is cross-checked against a dense direct solve of the
hand-assembled backward-Euler system, and the all-Neumann mass invariant
is verified on a small grid.
"""

import numpy as np
import pytest

from forchflow import solver
from forchflow.constitutive import CouplingLaw, ForchheimerPolynomial
from forchflow.errors import StepError
from forchflow.grid import EDGES, NEUMANN, StructuredGrid
from forchflow.solver import (
    ModelParameters,
    SimulationState,
    StencilOperator,
    StepperConfig,
    coupled_step,
    run,
)

ALL_NEUMANN = {edge: NEUMANN for edge in EDGES}
LINEAR = ForchheimerPolynomial((1.0,), (0.0,))
AFFINE = ForchheimerPolynomial((1.0, 1.0), (0.0, 1.0))
NO_COUPLING = CouplingLaw(0.0, 0.5)


def neumann_grid(nx, ny, **kw):
    return StructuredGrid(nx, ny, edge_tags=dict(ALL_NEUMANN),
                          allow_all_neumann=True, **kw)


def test_parameter_validation():
    with pytest.raises(ValueError):
        ModelParameters(lam=0.0, k2=1.0, poly=LINEAR, coupling=NO_COUPLING,
                        t_final=1.0)
    with pytest.raises(ValueError):
        ModelParameters(lam=0.5, k2=-1.0, poly=LINEAR, coupling=NO_COUPLING,
                        t_final=1.0)
    with pytest.raises(ValueError):
        ModelParameters(lam=0.8, k2=1.0, poly=LINEAR, coupling=NO_COUPLING,
                        t_final=1.0, alpha=1.5)  # below 2 - delta


def test_alpha_defaults_to_smallest_admissible():
    p = ModelParameters(lam=0.7, k2=1.0, poly=AFFINE, coupling=NO_COUPLING,
                        t_final=1.0)
    assert p.alpha == pytest.approx(2.0 - p.delta)
    assert p.delta == pytest.approx(0.3)


def test_admissibility_issues():
    # g = 1 has envelope exponent a = 0, violating a > delta and a in (0,1)
    p = ModelParameters(lam=0.8, k2=1.0, poly=LINEAR, coupling=NO_COUPLING,
                        t_final=1.0)
    issues = p.admissibility_issues()
    assert issues
    with pytest.raises(ValueError):
        p.check_admissibility(strict=True)
    good = ModelParameters(lam=0.8, k2=1.0, poly=AFFINE,
                           coupling=CouplingLaw(1.0, 0.5), t_final=1.0)
    assert good.admissibility_issues() == []


def test_stencil_operator_matches_hand_stencil():
    """The assembled operator equals the hand-written 5-point stencil."""
    g = neumann_grid(3, 3)
    kx = np.arange(1.0, 7.0).reshape(2, 3)          # interior x-faces
    ky = np.arange(1.0, 7.0).reshape(3, 2) * 0.5    # interior y-faces
    diag_extra = np.linspace(1.0, 2.0, 9)
    A = solver._assemble_diffusion(g, kx, ky, diag_extra)
    dense = A.to_dense()
    # hand assembly: flat id = i*ny + j, transmissibility k*dy/dx
    hand = np.diag(diag_extra.copy())
    for i in range(2):
        for j in range(3):
            left, right = i * 3 + j, (i + 1) * 3 + j
            c = kx[i, j] * g.dy / g.dx
            hand[left, left] += c
            hand[right, right] += c
            hand[left, right] -= c
            hand[right, left] -= c
    for i in range(3):
        for j in range(2):
            lo, hi = i * 3 + j, i * 3 + j + 1
            c = ky[i, j] * g.dx / g.dy
            hand[lo, lo] += c
            hand[hi, hi] += c
            hand[lo, hi] -= c
            hand[hi, lo] -= c
    np.testing.assert_allclose(dense, hand, atol=1e-14)
    np.testing.assert_allclose(A.diagonal(), np.diag(hand), atol=1e-14)
    # column sums vanish where diag_extra does: discrete conservation
    B = solver._assemble_diffusion(g, kx, ky, np.zeros(9))
    np.testing.assert_allclose(B.to_dense().sum(axis=0), 0.0, atol=1e-12)


def test_lam_one_step_matches_dense_solve():
    """One backward-Euler step (lam=1, g=1, b=0) vs dense oracle at 1e-12.

    With a constant conductivity the Picard loop reproduces the same
    linear system every pass, so the oracle is exactly
    (vol/dt I + A + robin) u = vol/dt u0.
    """
    g = StructuredGrid(5, 5, robin_phi=0.2)
    params = ModelParameters(lam=1.0, k2=1.0, poly=LINEAR,
                             coupling=NO_COUPLING, t_final=0.1)
    cfg = StepperConfig(dt=0.1)
    x, y = g.cell_centers()
    u0 = np.cos(np.pi * x) * np.cos(np.pi * y) + 0.3 * x
    v0 = np.sin(1.0 + y)
    state = SimulationState.from_initial(u0, v0, params.lam)
    new_state, diag = coupled_step(g, params, cfg, state)

    vol = g.cell_area
    kx = np.ones((4, 5))
    ky = np.ones((5, 4))
    robin = np.zeros(25)
    robin[g.edge_cell_indices("right")] = 0.2 * g.edge_face_length("right")
    A = solver._assemble_diffusion(g, kx, ky, vol / cfg.dt + robin)
    oracle_u = np.linalg.solve(A.to_dense(), vol / cfg.dt * u0.ravel())
    np.testing.assert_allclose(new_state.u.ravel(), oracle_u,
                               rtol=1e-12, atol=1e-12)

    Av = solver._assemble_diffusion(g, kx, ky, np.full(25, vol / cfg.dt))
    oracle_v = np.linalg.solve(Av.to_dense(), vol / cfg.dt * v0.ravel())
    np.testing.assert_allclose(new_state.v.ravel(), oracle_v,
                               rtol=1e-12, atol=1e-12)
    assert diag.coupling_iters == 1  # decoupled


def test_heat_mode_decay():
    """lam=1, g=1 reproduces the exact heat mode to first order in dt."""
    g = neumann_grid(64, 4)
    params = ModelParameters(lam=1.0, k2=1.0, poly=LINEAR,
                             coupling=NO_COUPLING, t_final=0.1)
    cfg = StepperConfig(dt=0.002)
    x, _ = g.cell_centers()
    u0 = np.cos(np.pi * x)
    result = run(g, params, cfg, u0, np.zeros_like(u0), cadence=10**9)
    t_end, u_end, _, _ = result.snapshots[-1]
    exact = np.exp(-np.pi**2 * t_end) * np.cos(np.pi * x)
    assert np.max(np.abs(u_end - exact)) <= 5e-3


def test_exact_conservation_small_grid():
    g = neumann_grid(16, 16)
    params = ModelParameters(lam=0.8, k2=1.0, poly=AFFINE,
                             coupling=CouplingLaw(1.0, 0.5), t_final=0.1)
    cfg = StepperConfig(dt=0.01)
    x, y = g.cell_centers()
    u0 = 3.0 + 0.5 * np.cos(np.pi * x) * np.cos(np.pi * y)
    v0 = 0.5 + 0.1 * np.cos(np.pi * y)
    result = run(g, params, cfg, u0, v0, cadence=1)
    masses = [g.volume_integral(w + v) for (_, _, w, v) in result.snapshots]
    drift = max(abs(m - masses[0]) for m in masses) / masses[0]
    assert drift <= 1e-11


def test_decoupled_takes_one_coupling_iteration():
    g = neumann_grid(8, 8)
    params = ModelParameters(lam=0.8, k2=1.0, poly=AFFINE,
                             coupling=NO_COUPLING, t_final=0.05)
    cfg = StepperConfig(dt=0.01)
    x, y = g.cell_centers()
    result = run(g, params, cfg, 1.0 + 0.2 * np.cos(np.pi * x),
                 0.5 + 0.1 * np.cos(np.pi * y))
    assert all(d.coupling_iters == 1 for d in result.diagnostics)


def test_positivity_preserved_for_degenerate_case():
    g = neumann_grid(12, 12)
    params = ModelParameters(lam=0.6, k2=1.0, poly=AFFINE,
                             coupling=CouplingLaw(1.0, 0.5), t_final=0.05)
    cfg = StepperConfig(dt=0.01)
    x, y = g.cell_centers()
    # dips to zero; from_initial clamps and the step keeps it nonnegative
    u0 = np.maximum(np.cos(np.pi * x) * np.cos(np.pi * y), 0.0)
    v0 = np.full_like(u0, 0.2)
    result = run(g, params, cfg, u0, v0, cadence=1)
    for _, u, _, v in result.snapshots:
        assert np.all(u >= 0.0)
        assert np.all(v >= 0.0)


def test_signed_fields_allowed_when_not_degenerate():
    g = neumann_grid(16, 4)
    params = ModelParameters(lam=1.0, k2=1.0, poly=LINEAR,
                             coupling=NO_COUPLING, t_final=0.02)
    cfg = StepperConfig(dt=0.01)
    x, _ = g.cell_centers()
    result = run(g, params, cfg, np.cos(np.pi * x), np.zeros((16, 4)))
    _, u_end, _, _ = result.snapshots[-1]
    assert u_end.min() < -0.1  # the negative lobe survives


def test_t_final_must_be_multiple_of_dt():
    g = neumann_grid(4, 4)
    params = ModelParameters(lam=1.0, k2=1.0, poly=LINEAR,
                             coupling=NO_COUPLING, t_final=0.05)
    with pytest.raises(ValueError):
        run(g, params, StepperConfig(dt=0.02), np.ones((4, 4)), np.ones((4, 4)))


def test_step_failure_attaches_partial_result():
    g = neumann_grid(8, 8)
    params = ModelParameters(lam=0.8, k2=1.0, poly=AFFINE,
                             coupling=CouplingLaw(50.0, 0.5), t_final=0.2)
    # an absurd iteration budget forces failure even after halvings
    cfg = StepperConfig(dt=0.1, max_coupling_iters=1, max_halvings=1)
    x, y = g.cell_centers()
    with pytest.raises(StepError) as excinfo:
        run(g, params, cfg, 2.0 + 0.5 * np.cos(np.pi * x),
            0.3 + 0.1 * np.cos(np.pi * y))
    partial = excinfo.value.partial_result
    assert partial.completed is False
    assert len(partial.ledger) >= 1  # at least the initial row exists


def test_dt_halving_recovers_from_tight_budget():
    g = neumann_grid(8, 8)
    params = ModelParameters(lam=0.8, k2=1.0, poly=AFFINE,
                             coupling=CouplingLaw(1.0, 0.5), t_final=0.8)
    x, y = g.cell_centers()
    u0 = 2.0 + 0.5 * np.cos(np.pi * x)
    v0 = 0.3 + 0.1 * np.cos(np.pi * y)
    state = SimulationState.from_initial(u0, v0, params.lam)
    # dt = 0.8 and 0.4 need more than 15 coupling iterations here, dt = 0.2
    # fits; a budget of 15 forces two levels of halving that then succeed
    budget = 15
    _, diag_ok = coupled_step(g, params, StepperConfig(dt=0.2), state, dt=0.2)
    assert diag_ok.coupling_iters <= budget
    with pytest.raises(StepError):
        coupled_step(g, params,
                     StepperConfig(dt=0.4, max_coupling_iters=budget),
                     state, dt=0.4)
    tight = StepperConfig(dt=0.8, max_coupling_iters=budget, max_halvings=3)
    result = run(g, params, tight, u0, v0)
    assert result.completed
    # the merged diagnostics show the step was assembled from sub-steps
    assert result.diagnostics[0].coupling_iters > budget


def test_constant_state_is_fixed_point():
    g = neumann_grid(6, 6)
    params = ModelParameters(lam=0.8, k2=2.0, poly=AFFINE,
                             coupling=CouplingLaw(1.0, 0.5), t_final=0.02)
    cfg = StepperConfig(dt=0.01)
    c = 1.7
    # u = v = c: exchange vanishes and both fields are steady
    result = run(g, params, cfg, np.full((6, 6), c), np.full((6, 6), c))
    _, u_end, _, v_end = result.snapshots[-1]
    np.testing.assert_allclose(u_end, c, rtol=1e-10)
    np.testing.assert_allclose(v_end, c, rtol=1e-10)
