"""Energy functionals, explicit constants and bound checks.

Every admissible trajectory of the coupled system obeys a Gronwall-type
growth bound

    V(t) <= V(0) * exp(C3 * t),   V(t) = 1 + int(|u|^alpha + v^2) dx,

plus a time-integrated bound on the weighted gradient functionals.  The
constants (C1..C6, the trace parameters mu0..mu2, theta, beta) are
evaluated from the model parameters and from fitted conductivity
envelope constants d1..d3; nothing is assumed, everything is computed.

Checks are report-generating: they return pass/fail objects with
margins instead of raising, so discretization error can be told apart
from genuine bound violations by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConstantsLedger:
    """All explicit constants entering the a-priori bounds."""

    lam: float
    delta: float
    a: float
    alpha: float
    sigma: float
    c_hat: float
    k2: float
    area: float
    t_final: float
    d1: float
    d2: float
    d3: float
    c_tilde: float
    c_tilde_inv: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    mu0: float
    alpha_star: float
    theta_alpha: float
    mu1: float
    mu2: float
    beta: float
    violations: tuple = field(default_factory=tuple)

    def as_dict(self):
        keys = (
            "lam delta a alpha sigma c_hat k2 area t_final d1 d2 d3 "
            "c_tilde c_tilde_inv c1 c2 c3 c4 c5 c6 mu0 alpha_star "
            "theta_alpha mu1 mu2 beta"
        ).split()
        out = {k: getattr(self, k) for k in keys}
        out["violations"] = ";".join(self.violations)
        return out


def compute_constants(params, area, d_estimates=None):
    """Evaluate the constants ledger for a parameter set.

    Args:
        params: ModelParameters (provides lam, alpha, sigma, c_hat, k2,
            t_final and the drag polynomial).
        area: measure of the spatial domain.
        d_estimates: optional (d1, d2, d3); fitted from the polynomial
            when omitted.

    Hypothesis violations (a <= delta, theta outside (0, 1), ...) are
    recorded in the ledger's ``violations`` tuple; the ledger is always
    returned.
    """
    lam = params.lam
    delta = 1.0 - lam
    a = params.poly.envelope_exponent
    alpha = params.alpha
    sigma = params.coupling.exponent
    c_hat = params.coupling.magnitude
    k2 = params.k2
    t_final = params.t_final

    if d_estimates is None:
        d1, d2 = params.poly.estimate_envelope_bounds(1e6, 400)
        d3 = params.poly.estimate_growth_floor(1e6, 400)
    else:
        d1, d2, d3 = d_estimates

    violations = []
    if not a > delta:
        violations.append(f"a > delta fails (a={a}, delta={delta})")
    if not (2.0 - delta) <= alpha <= 2.0:
        violations.append(f"alpha outside [2-delta, 2] (alpha={alpha})")
    if not sigma <= alpha / 2.0:
        violations.append(f"sigma <= alpha/2 fails (sigma={sigma})")

    c_tilde = min(lam / alpha, 0.5)
    c_tilde_inv = 1.0 / c_tilde
    c2 = min(lam / alpha, d3 * (alpha - lam))
    c1 = (d3 * (alpha - lam) + c_hat) / c2 * area
    c3 = max(2.5 * c_tilde_inv * c_hat * area, 2.0 * c_tilde_inv * c_hat)
    c4 = min(alpha - lam, k2)
    growth = math.exp(c3 * t_final)
    c5 = 2.5 * t_final / c4 * c_hat * area + 2.0 * t_final * c_hat * growth / c4
    c6 = 2.0 * c_hat * growth / c2

    mu0 = (a - delta) / (1.0 - a) if a < 1.0 else math.inf
    alpha_star = 2.0 * (a - delta) / (2.0 - a)
    if alpha_star > 0.0 and alpha / alpha_star > 1.0 and a < 1.0:
        theta = 1.0 / ((1.0 - a) * (alpha / alpha_star - 1.0))
    else:
        theta = math.nan
    if not (0.0 < theta < 1.0):
        violations.append(f"theta_alpha outside (0, 1) (theta={theta})")
        mu1 = mu2 = beta = math.nan
    else:
        mu1 = mu0 * (1.0 + theta * (1.0 - a)) / (1.0 - theta)
        mu2 = 1.0 / (1.0 - a) + theta * (2.0 - a) / ((1.0 - theta) * (1.0 - a))
        beta = alpha + mu1

    return ConstantsLedger(
        lam=lam, delta=delta, a=a, alpha=alpha, sigma=sigma, c_hat=c_hat,
        k2=k2, area=area, t_final=t_final, d1=d1, d2=d2, d3=d3,
        c_tilde=c_tilde, c_tilde_inv=c_tilde_inv,
        c1=c1, c2=c2, c3=c3, c4=c4, c5=c5, c6=c6,
        mu0=mu0, alpha_star=alpha_star, theta_alpha=theta,
        mu1=mu1, mu2=mu2, beta=beta, violations=tuple(violations),
    )


@dataclass(frozen=True)
class EnergyRow:
    """One ledger entry: the monitored functionals at a single time."""

    t: float
    int_u_alpha: float
    int_v_sq: float
    int_grad_u_weighted: float
    int_grad_v_sq: float
    V: float
    Lambda: float
    V_bound: float = math.nan
    coupling_iters: int = 0

    CSV_HEADER = (
        "t,int_u_alpha,int_v_sq,int_grad_u_weighted,"
        "int_grad_v_sq,V,Lambda,V_bound,coupling_iters"
    )

    def csv_line(self):
        floats = (
            self.t, self.int_u_alpha, self.int_v_sq, self.int_grad_u_weighted,
            self.int_grad_v_sq, self.V, self.Lambda, self.V_bound,
        )
        return ",".join(repr(float(x)) for x in floats) + f",{self.coupling_iters}"


def evaluate_functionals(grid, params, u, v, t=0.0):
    """Evaluate every monitored functional at one state (midpoint rule).

    Gradient factors come from face-normal derivatives averaged back to
    cells; the conductivity potential is evaluated in one vectorized
    batch over the cell gradient magnitudes.
    """
    alpha = params.alpha
    delta = 1.0 - params.lam
    a = params.poly.envelope_exponent

    abs_u = np.abs(u)
    int_u_alpha = grid.volume_integral(abs_u ** alpha)
    int_v_sq = grid.volume_integral(np.asarray(v) ** 2)

    grad_u = grid.cell_gradient_magnitude(u)
    weight_exp = alpha + delta - 2.0
    weight = np.ones_like(abs_u) if weight_exp == 0.0 else abs_u ** weight_exp
    int_grad_u_weighted = grid.volume_integral(grad_u ** (2.0 - a) * weight)
    int_grad_v_sq = grid.volume_integral(grid.cell_gradient_magnitude(v) ** 2)

    potential = params.poly.potential_batch(grad_u)
    lam_fun = 0.5 * (params.lam + 1.0) * grid.volume_integral(potential) + int_u_alpha

    return EnergyRow(
        t=t,
        int_u_alpha=int_u_alpha,
        int_v_sq=int_v_sq,
        int_grad_u_weighted=int_grad_u_weighted,
        int_grad_v_sq=int_grad_v_sq,
        V=1.0 + int_u_alpha + int_v_sq,
        Lambda=lam_fun,
    )


@dataclass(frozen=True)
class GronwallReport:
    passed: bool
    c3: float
    max_relative_excess: float
    empirical_rate: float
    worst_time: float

    def summary(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"gronwall: {verdict} (max excess {self.max_relative_excess:.3e}, "
            f"empirical rate {self.empirical_rate:.6g} vs C3 {self.c3:.6g})"
        )


def gronwall_check(rows, constants, rel_slack=1e-9):
    """Check V(t) <= V(0) exp(C3 t) at every ledger row.

    Also reports the largest empirical growth rate
    max_k log(V_{k+1}/V_k) / (t_{k+1} - t_k) for comparison with C3.
    """
    if len(rows) < 2:
        raise ValueError("need at least two ledger rows")
    t = np.array([r.t for r in rows])
    V = np.array([r.V for r in rows])
    bound = V[0] * np.exp(constants.c3 * (t - t[0]))
    excess = V / bound - 1.0
    worst = int(np.argmax(excess))
    with np.errstate(divide="ignore", invalid="ignore"):
        rates = np.diff(np.log(V)) / np.diff(t)
    empirical = float(np.nanmax(rates)) if rates.size else 0.0
    return GronwallReport(
        passed=bool(np.all(excess <= rel_slack)),
        c3=constants.c3,
        max_relative_excess=float(excess[worst]),
        empirical_rate=empirical,
        worst_time=float(t[worst]),
    )


@dataclass(frozen=True)
class IntegratedGradientReport:
    passed: bool
    lhs: float
    rhs: float

    @property
    def margin(self):
        return self.rhs - self.lhs

    def summary(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"integrated-gradient: {verdict} (lhs {self.lhs:.6g} <= rhs {self.rhs:.6g})"


def integrated_gradient_check(rows, constants, u0_alpha_norm, v0_sq_norm):
    """Check the time-integrated gradient bound over the trajectory.

    Trapezoid-integrates the weighted u-gradient and v-gradient
    functionals over time and compares with
    C5 + C6 (T ||u0||_alpha^alpha + T ||v0||_2^2); the initial norms are
    extended constantly in time, matching the bound's space-time norms.
    """
    t = np.array([r.t for r in rows])
    gu = np.array([r.int_grad_u_weighted for r in rows])
    gv = np.array([r.int_grad_v_sq for r in rows])
    lhs = float(np.trapezoid(gu + gv, t)) if len(rows) > 1 else 0.0
    horizon = constants.t_final
    rhs = constants.c5 + constants.c6 * (horizon * u0_alpha_norm + horizon * v0_sq_norm)
    return IntegratedGradientReport(passed=lhs <= rhs, lhs=lhs, rhs=rhs)


@dataclass(frozen=True)
class TraceProbeReport:
    lhs: float
    gradient_term: float
    norm_term: float
    mu0_term: float
    mu1_term: float
    minimal_c: float


def trace_probe(grid, params, constants, u, eps):
    """Smallest C making the boundary trace inequality hold for this u.

    Computes the outflow-boundary integral of |u|^alpha and the four
    interior ingredient terms, then solves for the minimal nonnegative C
    multiplying the three norm-based terms.  Exploratory: the analytic C
    is not computable, so this probes how sharp the inequality is.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    a = constants.a
    delta = constants.delta
    alpha = constants.alpha
    for name, ok in (
        ("a in (0,1)", 0.0 < a < 1.0),
        ("a > delta", a > delta),
        ("alpha >= 2 - delta", alpha >= 2.0 - delta),
        ("alpha <= 2", alpha <= 2.0),
        ("theta_alpha in (0,1)", 0.0 < constants.theta_alpha < 1.0),
    ):
        if not ok:
            raise ValueError(f"trace inequality hypothesis violated: {name}")
    if not grid.robin_edges:
        raise ValueError("trace probe needs a nonempty outflow boundary")

    u = np.asarray(u, dtype=float)
    lhs = 0.0
    for edge in grid.robin_edges:
        cells = grid.edge_cell_indices(edge)
        lhs += float(
            np.sum(np.abs(u.ravel()[cells]) ** alpha) * grid.edge_face_length(edge)
        )

    grad_u = grid.cell_gradient_magnitude(u)
    weight_exp = alpha + delta - 2.0
    weight = np.ones_like(u) if weight_exp == 0.0 else np.abs(u) ** weight_exp
    gradient_term = 2.0 * eps * grid.volume_integral(grad_u ** (2.0 - a) * weight)

    norm_alpha = grid.volume_integral(np.abs(u) ** alpha)
    norm_term = norm_alpha
    mu0_term = eps ** (-1.0 / (1.0 - a)) * norm_alpha ** ((alpha + constants.mu0) / alpha)
    mu1_term = eps ** (-constants.mu2) * norm_alpha ** ((alpha + constants.mu1) / alpha)

    denom = norm_term + mu0_term + mu1_term
    minimal_c = 0.0 if denom == 0.0 else max(0.0, (lhs - gradient_term) / denom)
    return TraceProbeReport(
        lhs=lhs,
        gradient_term=gradient_term,
        norm_term=norm_term,
        mu0_term=mu0_term,
        mu1_term=mu1_term,
        minimal_c=minimal_c,
    )
