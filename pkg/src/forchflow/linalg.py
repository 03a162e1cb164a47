"""Minimal sparse linear algebra for the per-step implicit systems.

A row-compressed matrix assembled from (row, col, value) triplets, plus
Jacobi-preconditioned Krylov solvers: conjugate gradients when the
caller declares symmetry, stabilized bi-conjugate gradients otherwise.
Assembly is deterministic regardless of contribution order, which keeps
runs bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError


class SparseMatrix:
    """Square CSR matrix.

    Build with :meth:`from_coo`; duplicate (row, col) contributions are
    summed.  Immutable after assembly.
    """

    def __init__(self, n, row_ptr, col_idx, values):
        self.n = int(n)
        self.row_ptr = row_ptr
        self.col_idx = col_idx
        self.values = values
        # expanded row index per nonzero, for the bincount-based matvec
        self._row_idx = np.repeat(np.arange(self.n), np.diff(row_ptr))

    @classmethod
    def from_coo(cls, n, rows, cols, values):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        if not (rows.shape == cols.shape == values.shape):
            raise ValueError("rows, cols and values must have matching shapes")
        if rows.size and (
            rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n
        ):
            raise ValueError("triplet index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if rows.size:
            new_entry = np.empty(rows.size, dtype=bool)
            new_entry[0] = True
            new_entry[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(new_entry)
            summed = np.add.reduceat(values, starts)
            rows, cols, values = rows[starts], cols[starts], summed
        row_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(row_ptr, rows + 1, 1)
        np.cumsum(row_ptr, out=row_ptr)
        return cls(n, row_ptr, cols, values)

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError("vector length does not match matrix dimension")
        return np.bincount(
            self._row_idx, weights=self.values * x[self.col_idx], minlength=self.n
        )

    def diagonal(self):
        diag = np.zeros(self.n)
        on_diag = self._row_idx == self.col_idx
        diag[self._row_idx[on_diag]] = self.values[on_diag]
        return diag

    def to_dense(self):
        dense = np.zeros((self.n, self.n))
        dense[self._row_idx, self.col_idx] = self.values
        return dense


@dataclass(frozen=True)
class IterationReport:
    method: str
    iterations: int
    residual: float
    converged: bool


def solve(A, rhs, x0=None, rtol=1e-10, max_iter=5000, symmetric=False):
    """Solve A x = rhs to ||Ax - rhs|| <= rtol ||rhs||.

    Returns (x, IterationReport).  Raises NumericError on breakdown or
    when the iteration budget is exhausted; the final relative residual
    is checked post-hoc on every return.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (A.n,):
        raise ValueError("rhs length does not match matrix dimension")
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return np.zeros(A.n), IterationReport("trivial", 0, 0.0, True)
    x0 = np.zeros(A.n) if x0 is None else np.asarray(x0, dtype=float).copy()

    diag = A.diagonal()
    if np.any(diag == 0.0):
        raise NumericError("zero diagonal entry; Jacobi preconditioner undefined")
    inv_diag = 1.0 / diag

    kernel = _pcg if symmetric else _bicgstab
    method = "cg" if symmetric else "bicgstab"

    # The recursion residual inside the Krylov loop can drift from the
    # true residual near machine precision, so restart from the current
    # iterate (a cheap polish) before declaring failure.
    x, iters = kernel(A, rhs, x0, inv_diag, rtol * rhs_norm, max_iter)
    residual = float(np.linalg.norm(A.matvec(x) - rhs)) / rhs_norm
    for _ in range(2):
        if residual <= rtol:
            break
        x, extra = kernel(A, rhs, x, inv_diag, 0.5 * rtol * rhs_norm, max_iter)
        iters += extra
        residual = float(np.linalg.norm(A.matvec(x) - rhs)) / rhs_norm
    if residual > 10.0 * rtol:
        raise NumericError(f"{method} returned with residual above rtol", residual)
    return x, IterationReport(method, iters, residual, True)


def _pcg(A, b, x, inv_diag, atol, max_iter):
    r = b - A.matvec(x)
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, max_iter + 1):
        if np.linalg.norm(r) <= atol:
            return x, k - 1
        Ap = A.matvec(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise NumericError("CG breakdown: operator not positive definite", float(np.linalg.norm(r)))
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NumericError("CG iteration budget exhausted", float(np.linalg.norm(r)))


def _bicgstab(A, b, x, inv_diag, atol, max_iter):
    r = b - A.matvec(x)
    r_hat = r.copy()
    rho = alpha = omega = 1.0
    v = p = np.zeros_like(b)
    for k in range(1, max_iter + 1):
        if np.linalg.norm(r) <= atol:
            return x, k - 1
        rho_new = float(r_hat @ r)
        if rho_new == 0.0 or omega == 0.0:
            raise NumericError("BiCGStab breakdown", float(np.linalg.norm(r)))
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        p_hat = inv_diag * p
        v = A.matvec(p_hat)
        denom = float(r_hat @ v)
        if denom == 0.0:
            raise NumericError("BiCGStab breakdown", float(np.linalg.norm(r)))
        alpha = rho / denom
        s = r - alpha * v
        if np.linalg.norm(s) <= atol:
            return x + alpha * p_hat, k
        s_hat = inv_diag * s
        t = A.matvec(s_hat)
        tt = float(t @ t)
        if tt == 0.0:
            raise NumericError("BiCGStab breakdown", float(np.linalg.norm(s)))
        omega = float(t @ s) / tt
        x = x + alpha * p_hat + omega * s_hat
        r = s - omega * t
    raise NumericError("BiCGStab iteration budget exhausted", float(np.linalg.norm(r)))
