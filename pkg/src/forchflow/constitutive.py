"""Generalized Forchheimer constitutive machinery.

The active population moves by a non-Darcy momentum closure built from a
polynomial drag law

    g(s) = a0 + a1 s**e1 + ... + aN s**eN,    a0 > 0, ak >= 0,

with strictly increasing exponents starting at 0.  The induced flux map
G(s) = s g(s) is strictly increasing on [0, inf), so it has a
well-defined inverse, and the nonlinear conductivity

    K(xi) = 1 / g(G^{-1}(xi))

drives the degenerate diffusion term of the active-density equation.
The associated potential

    H(xi) = int_0^{xi^2} K(sqrt(s)) ds = int_0^xi 2 r K(r) dr

is monitored along trajectories; it is sandwiched between K(xi) xi^2 and
2 K(xi) xi^2.

The exchange term between the two populations is an odd power law of the
density difference, bounded by c_hat * |z|**sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

# Gauss-Legendre nodes/weights on [0, 1], used by the batched potential.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


@dataclass(frozen=True)
class ForchheimerPolynomial:
    """Polynomial drag law with nonnegative coefficients.

    Args:
        coefficients: (a0, ..., aN), all >= 0 with a0 > 0.
        exponents: (0, e1, ..., eN), strictly increasing, e0 == 0.
            Non-integer exponents are allowed.
    """

    coefficients: tuple
    exponents: tuple

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        exps = tuple(float(e) for e in self.exponents)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "exponents", exps)
        if len(coeffs) == 0 or len(coeffs) != len(exps):
            raise ValueError("coefficients and exponents must be parallel, nonempty lists")
        if coeffs[0] <= 0.0:
            raise ValueError("leading coefficient must be positive")
        if any(c < 0.0 for c in coeffs):
            raise ValueError("all coefficients must be nonnegative")
        if exps[0] != 0.0:
            raise ValueError("first exponent must be 0")
        if any(e2 <= e1 for e1, e2 in zip(exps, exps[1:])):
            raise ValueError("exponents must be strictly increasing")

    # ------------------------------------------------------------------
    # Drag law and flux map
    # ------------------------------------------------------------------

    @property
    def top_exponent(self) -> float:
        """Largest exponent eN (0 for a constant drag law)."""
        return self.exponents[-1]

    @property
    def envelope_exponent(self) -> float:
        """Decay exponent a = eN / (eN + 1) of the conductivity envelope."""
        eN = self.top_exponent
        return eN / (eN + 1.0)

    @property
    def concavity_ratio(self) -> float:
        """theta with g(s) >= theta * s * g'(s); equals 1 / max(eN, 1)."""
        return 1.0 / max(self.top_exponent, 1.0)

    def drag(self, s):
        """Evaluate g(s) for s >= 0 (scalar or array)."""
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < 0.0):
            raise ValueError("drag law is defined for nonnegative speeds only")
        out = np.zeros_like(s_arr)
        for c, e in zip(self.coefficients, self.exponents):
            if e == 0.0:
                out = out + c
            else:
                out = out + c * np.where(s_arr > 0.0, s_arr, 1.0) ** e * (s_arr > 0.0)
        return out if out.ndim else float(out)

    def drag_slope(self, s):
        """Evaluate g'(s); at s == 0 the one-sided limit is used."""
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < 0.0):
            raise ValueError("drag law is defined for nonnegative speeds only")
        out = np.zeros_like(s_arr)
        zero = s_arr == 0.0
        safe = np.where(zero, 1.0, s_arr)
        for c, e in zip(self.coefficients, self.exponents):
            if e == 0.0 or c == 0.0:
                continue
            term = c * e * safe ** (e - 1.0)
            if e < 1.0:
                term = np.where(zero, np.inf, term)
            elif e == 1.0:
                term = np.where(zero, c, term)
            else:
                term = np.where(zero, 0.0, term)
            out = out + term
        return out if out.ndim else float(out)

    def flux(self, s):
        """Evaluate G(s) = s g(s)."""
        s_arr = np.asarray(s, dtype=float)
        out = s_arr * self.drag(s_arr)
        return out if out.ndim else float(out)

    def inverse_flux(self, xi, rtol=1e-12, max_iter=200):
        """Solve s g(s) = xi for s >= 0 (safeguarded Newton).

        The root is bracketed in [0, xi/a0] since G(s) >= a0 s.  Newton
        steps are taken whenever they stay inside the bracket; otherwise
        the bracket is bisected.

        Raises:
            NumericError: relative residual above rtol after max_iter.
        """
        xi_arr = np.asarray(xi, dtype=float)
        scalar = xi_arr.ndim == 0
        x = np.atleast_1d(xi_arr).astype(float)
        if np.any(x < 0.0) or not np.all(np.isfinite(x)):
            raise ValueError("flux values must be finite and nonnegative")
        tol = rtol * np.maximum(x, np.finfo(float).tiny)
        lo = np.zeros_like(x)
        hi = x / self.coefficients[0]
        s = hi.copy()
        f = self.flux(s) - x
        for _ in range(max_iter):
            done = np.abs(f) <= tol
            if done.all():
                break
            hi = np.where(f > 0.0, s, hi)
            lo = np.where(f < 0.0, s, lo)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                df = self.drag(s) + s * self.drag_slope(s)
                newton = s - f / df
            bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
            trial = np.where(bad, 0.5 * (lo + hi), newton)
            s = np.where(done, s, trial)
            f = self.flux(s) - x
        else:
            residual = float(np.max(np.abs(f) / np.maximum(x, np.finfo(float).tiny)))
            raise NumericError("flux inversion did not converge", residual)
        return float(s[0]) if scalar else s.reshape(xi_arr.shape)

    # ------------------------------------------------------------------
    # Conductivity and its potential
    # ------------------------------------------------------------------

    def conductivity(self, xi):
        """K(xi) = 1 / g(G^{-1}(xi)); nonincreasing, valued in (0, 1/a0]."""
        s = self.inverse_flux(xi)
        out = 1.0 / self.drag(s)
        return out

    def conductivity_slope(self, xi):
        """dK/dxi, via K' = -g'(s) / (g(s)^2 G'(s)) at s = G^{-1}(xi)."""
        xi_arr = np.asarray(xi, dtype=float)
        s = np.atleast_1d(np.asarray(self.inverse_flux(xi_arr), dtype=float))
        g = self.drag(s)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            gp = self.drag_slope(s)
            big_gp = g + s * gp
            out = np.where(np.isfinite(gp), -gp / (g * g * big_gp), -np.inf)
        out = np.where(np.atleast_1d(gp) == 0.0, 0.0, out)
        return float(out[0]) if xi_arr.ndim == 0 else out.reshape(xi_arr.shape)

    def potential(self, xi, abstol=None):
        """H(xi) = int_0^xi 2 r K(r) dr by adaptive Simpson quadrature.

        Args:
            xi: nonnegative upper limit.
            abstol: absolute tolerance; defaults to 1e-10 * max(xi^2, 1).

        Raises:
            NumericError: recursion depth exhausted before the local
                error estimate met the tolerance.
        """
        xi = float(xi)
        if xi < 0.0:
            raise ValueError("potential is defined for nonnegative arguments")
        if xi == 0.0:
            return 0.0
        if abstol is None:
            abstol = 1e-10 * max(xi * xi, 1.0)

        def f(r):
            return 2.0 * r * float(self.conductivity(r))

        def simpson(a, fa, b, fb, fm):
            return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

        def recurse(a, fa, b, fb, fm, whole, tol, depth):
            m = 0.5 * (a + b)
            lm, rm = 0.5 * (a + m), 0.5 * (m + b)
            flm, frm = f(lm), f(rm)
            left = simpson(a, fa, m, fm, flm)
            right = simpson(m, fm, b, fb, frm)
            err = left + right - whole
            if abs(err) <= 15.0 * tol:
                return left + right + err / 15.0
            if depth <= 0:
                raise NumericError("potential quadrature did not converge", abs(err))
            return recurse(a, fa, m, fm, flm, left, 0.5 * tol, depth - 1) + recurse(
                m, fm, b, fb, frm, right, 0.5 * tol, depth - 1
            )

        fa, fb, fm = f(0.0), f(xi), f(0.5 * xi)
        whole = simpson(0.0, fa, xi, fb, fm)
        return recurse(0.0, fa, xi, fb, fm, whole, abstol, 48)

    def potential_batch(self, xi):
        """Vectorized H over an array of nonnegative arguments.

        Uses a composite Gauss rule on panels refined both by the sorted
        input values and by a geometric grid, then maps the cumulative
        integral back to the inputs.  Much faster than per-value
        adaptive quadrature when xi has thousands of entries.
        """
        xi_arr = np.asarray(xi, dtype=float)
        flat = np.atleast_1d(xi_arr).ravel()
        if np.any(flat < 0.0):
            raise ValueError("potential is defined for nonnegative arguments")
        vals = np.unique(flat[flat > 0.0])
        if vals.size == 0:
            return np.zeros_like(xi_arr, dtype=float)
        top = vals[-1]
        low = min(vals[0], top * 1e-12)
        n_geo = max(int(np.ceil(np.log(top / low) / np.log(1.2))), 1)
        geo = low * (top / low) ** (np.arange(n_geo + 1) / n_geo)
        edges = np.unique(np.concatenate(([0.0], vals, geo)))
        a, b = edges[:-1], edges[1:]
        nodes = a[:, None] + (b - a)[:, None] * _GL_NODES[None, :]
        integrand = 2.0 * nodes * self.conductivity(nodes.ravel()).reshape(nodes.shape)
        panel = (b - a) * (integrand * _GL_WEIGHTS[None, :]).sum(axis=1)
        cumulative = np.concatenate(([0.0], np.cumsum(panel)))
        idx = np.searchsorted(edges, flat)
        out = cumulative[idx]
        return out.reshape(xi_arr.shape) if xi_arr.ndim else float(out[0])

    # ------------------------------------------------------------------
    # Envelope constants (fitted, not assumed)
    # ------------------------------------------------------------------

    def sample_points(self, xi_max, samples):
        """Log-spaced sample grid over [0, xi_max], starting at 0."""
        if samples < 1:
            raise ValueError("need at least one sample")
        if samples == 1:
            return np.array([0.0])
        return np.concatenate(
            ([0.0], np.logspace(-6.0, np.log10(xi_max), samples - 1))
        )

    def estimate_envelope_bounds(self, xi_max, samples=400):
        """Fit (d1, d2) with d1 <= K(xi) (1+xi)^a <= d2 over samples."""
        xi = self.sample_points(xi_max, samples)
        scaled = self.conductivity(xi) * (1.0 + xi) ** self.envelope_exponent
        return float(scaled.min()), float(scaled.max())

    def estimate_growth_floor(self, xi_max=1e6, samples=400):
        """Fit d3 with d3 (xi^{2-a} - 1) <= K(xi) xi^2 over samples."""
        xi = self.sample_points(xi_max, samples)
        a = self.envelope_exponent
        denom = xi ** (2.0 - a) - 1.0
        mask = denom > 1e-9
        if not mask.any():
            return float(self.conductivity(0.0))
        ratio = self.conductivity(xi[mask]) * xi[mask] ** 2 / denom[mask]
        return float(ratio.min())


@dataclass(frozen=True)
class CouplingLaw:
    """Odd power-law exchange term b(z) = c_hat * sign(z) * |z|**sigma.

    Saturates the structural bound |b(z)| <= c_hat |z|**sigma with
    equality; odd and nondecreasing with b(0) = 0.  A zero magnitude
    decouples the two populations.
    """

    magnitude: float
    exponent: float

    def __post_init__(self):
        if self.magnitude < 0.0:
            raise ValueError("coupling magnitude must be nonnegative")
        if not 0.0 < self.exponent < 1.0:
            raise ValueError("coupling exponent must lie in (0, 1)")

    @property
    def is_zero(self) -> bool:
        return self.magnitude == 0.0

    def __call__(self, z):
        z_arr = np.asarray(z, dtype=float)
        out = self.magnitude * np.sign(z_arr) * np.abs(z_arr) ** self.exponent
        return out if out.ndim else float(out)
