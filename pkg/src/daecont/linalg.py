"""Dense linear-algebra and numerics substrate.

Everything here works on small (desk-scale) dense float64 arrays: LU solves
with partial pivoting, damped Newton iteration, a one-sided Jacobi SVD,
periodic quadrature and classical Runge-Kutta stepping.  All functions are
pure; inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    EvaluationError,
    NoConvergenceError,
    SingularJacobianError,
    SingularMatrixError,
)

# Pivot magnitudes below PIVOT_REL * ||A||_inf are treated as zero.
PIVOT_REL = 1e-13

__all__ = [
    "NewtonConfig",
    "solve_linear",
    "determinant",
    "fd_jacobian",
    "newton_solve",
    "svd_small",
    "quadrature_periodic",
    "rk4_step",
    "norm_inf",
]


def norm_inf(a) -> float:
    """Max absolute entry of a vector or matrix (0.0 for empty input)."""
    a = np.asarray(a, dtype=float)
    return float(np.abs(a).max()) if a.size else 0.0


def _lu_factor(a: np.ndarray):
    # Doolittle LU with partial pivoting; returns (lu, perm, sign).
    n = a.shape[0]
    lu = np.array(a, dtype=float)
    perm = np.arange(n)
    sign = 1.0
    threshold = PIVOT_REL * max(norm_inf(a), 1e-300)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) < threshold:
            raise SingularMatrixError(
                f"pivot {abs(lu[p, k]):.3e} below threshold {threshold:.3e} at column {k}"
            )
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        lu[k + 1 :, k] /= lu[k, k]
        lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return lu, perm, sign


def solve_linear(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` by LU with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides.  Raises
    :class:`SingularMatrixError` when a pivot falls below
    ``1e-13 * ||a||_inf``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise EvaluationError(f"expected square matrix, got shape {a.shape}")
    if b.shape[0] != n:
        raise EvaluationError(f"dimension mismatch: matrix {a.shape}, rhs {b.shape}")
    # Closed forms for the 1x1 and 2x2 cases; these dominate the inner
    # loops of the constraint solver.
    if n == 1:
        threshold = PIVOT_REL * max(abs(a[0, 0]), 1e-300)
        if abs(a[0, 0]) < threshold or a[0, 0] == 0.0:
            raise SingularMatrixError("1x1 system is singular")
        return b / a[0, 0]
    if n == 2:
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        if abs(det) < (PIVOT_REL * max(norm_inf(a), 1e-300)) ** 2 or det == 0.0:
            raise SingularMatrixError("2x2 system is singular")
        if b.ndim == 1:
            return np.array(
                [
                    (a[1, 1] * b[0] - a[0, 1] * b[1]) / det,
                    (a[0, 0] * b[1] - a[1, 0] * b[0]) / det,
                ]
            )
        return np.stack(
            [
                (a[1, 1] * b[0] - a[0, 1] * b[1]) / det,
                (a[0, 0] * b[1] - a[1, 0] * b[0]) / det,
            ]
        )
    lu, perm, _ = _lu_factor(a)
    x = b[perm].astype(float, copy=True)
    for k in range(1, n):
        x[k] -= lu[k, :k] @ x[:k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - lu[k, k + 1 :] @ x[k + 1 :]) / lu[k, k]
    if not np.all(np.isfinite(x)):
        raise EvaluationError("linear solve produced non-finite entries")
    return x


def determinant(a: np.ndarray) -> float:
    """Determinant via LU; returns 0.0 for numerically singular input."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    if n == 2:
        return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
    try:
        lu, _, sign = _lu_factor(a)
    except SingularMatrixError:
        return 0.0
    return float(sign * np.prod(np.diag(lu)))


def fd_jacobian(
    fun: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    *,
    central: bool = False,
    step: Optional[float] = None,
    f0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Finite-difference Jacobian of ``fun`` at ``x``.

    Forward differences with per-component step ``1e-7 * (1 + |x_i|)`` by
    default; ``central=True`` switches to central differences with step
    ``1e-5`` (used for continuation tangents, where symmetry pays off).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if central:
        h0 = 1e-5 if step is None else step
        cols = []
        for i in range(n):
            h = h0 * (1.0 + abs(x[i]))
            xp = x.copy()
            xm = x.copy()
            xp[i] += h
            xm[i] -= h
            cols.append((np.asarray(fun(xp), float) - np.asarray(fun(xm), float)) / (2 * h))
        return np.column_stack(cols)
    h0 = 1e-7 if step is None else step
    base = np.asarray(fun(x), dtype=float) if f0 is None else np.asarray(f0, dtype=float)
    cols = []
    for i in range(n):
        h = h0 * (1.0 + abs(x[i]))
        xp = x.copy()
        xp[i] += h
        cols.append((np.asarray(fun(xp), float) - base) / h)
    return np.column_stack(cols)


@dataclass(frozen=True)
class NewtonConfig:
    """Stopping and damping parameters for :func:`newton_solve`."""

    max_iters: int = 50
    tol_residual: float = 1e-12
    tol_step: float = 1e-14
    damping_min: float = 1.0 / 1024.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol_residual <= 0 or self.tol_step <= 0:
            raise ValueError("tolerances must be positive")
        if not (0.0 < self.damping_min <= 1.0):
            raise ValueError("damping_min must lie in (0, 1]")


def newton_solve(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]],
    x0: np.ndarray,
    cfg: NewtonConfig = NewtonConfig(),
) -> np.ndarray:
    """Damped Newton iteration for ``residual(x) = 0``.

    Parameters
    ----------
    residual : callable
        Maps an n-vector to an n-vector.
    jacobian : callable or None
        Jacobian of ``residual``; ``None`` selects forward differences.
    x0 : array
        Starting point.
    cfg : NewtonConfig
        Iteration budget and tolerances.

    Returns
    -------
    x : array with ``||residual(x)||_inf <= cfg.tol_residual``.

    Backtracking halves the step until the residual norm decreases, down
    to ``cfg.damping_min``; a step that cannot improve at the floor is
    taken anyway (the next iteration may recover), and failure to reach
    the residual tolerance within the budget raises
    :class:`NoConvergenceError`.  Success is decided by the residual
    alone, never by the iteration count or step size.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    r = np.atleast_1d(np.asarray(residual(x), dtype=float))
    rnorm = norm_inf(r)
    for _ in range(cfg.max_iters):
        if rnorm <= cfg.tol_residual:
            if not np.all(np.isfinite(x)):
                raise EvaluationError("newton iterate is non-finite")
            return x
        if jacobian is None:
            # the current residual doubles as the difference base point
            j = fd_jacobian(residual, x, f0=r)
        else:
            j = np.atleast_2d(np.asarray(jacobian(x), dtype=float))
        try:
            step = solve_linear(j, -r)
        except SingularMatrixError as exc:
            raise SingularJacobianError(str(exc)) from exc
        alpha = 1.0
        while True:
            x_new = x + alpha * step
            r_new = np.atleast_1d(np.asarray(residual(x_new), dtype=float))
            rnorm_new = norm_inf(r_new)
            if rnorm_new < rnorm or alpha <= cfg.damping_min:
                break
            alpha *= 0.5
        if norm_inf(alpha * step) <= cfg.tol_step and rnorm_new > cfg.tol_residual:
            raise NoConvergenceError(
                f"newton stagnated: step {norm_inf(alpha * step):.3e}, residual {rnorm_new:.3e}"
            )
        x, r, rnorm = x_new, r_new, rnorm_new
    if rnorm <= cfg.tol_residual:
        return x
    raise NoConvergenceError(
        f"newton used {cfg.max_iters} iterations, residual {rnorm:.3e} > {cfg.tol_residual:.3e}"
    )


def _orthonormal_fill(p: np.ndarray, filled: int) -> None:
    # Complete columns filled..n-1 of p to an orthonormal basis, scanning
    # identity vectors in index order (deterministic).  Two rounds of
    # Gram-Schmidt keep the result orthogonal to ~1e-15.
    n = p.shape[0]
    col = filled
    for cand in range(n):
        if col >= n:
            break
        v = np.zeros(n)
        v[cand] = 1.0
        for _ in range(2):
            v -= p[:, :col] @ (p[:, :col].T @ v)
        nv = float(np.sqrt(v @ v))
        if nv > 1e-6:
            p[:, col] = v / nv
            col += 1
    if col < n:
        raise NoConvergenceError("failed to complete orthonormal basis")


def svd_small(e: np.ndarray, *, max_sweeps: int = 50):
    """One-sided Jacobi SVD of a small square matrix.

    Returns ``(P, sigma, Q)`` with ``P.T @ e @ Q`` diagonal, ``sigma``
    nonnegative and nonincreasing, and both factors orthogonal to 1e-12.
    Columns of ``e @ Q`` are rotated pairwise until mutually orthogonal;
    left vectors for (near-)zero singular values are completed to an
    orthonormal basis deterministically.
    """
    e = np.asarray(e, dtype=float)
    n = e.shape[0]
    if e.shape != (n, n):
        raise EvaluationError(f"expected square matrix, got shape {e.shape}")
    if n > 32:
        raise EvaluationError("svd_small handles matrices up to 32x32")
    w = e.copy()
    q = np.eye(n)
    # Rotation threshold just above the roundoff floor of a column dot;
    # tighter values churn forever on rank-deficient input.  Columns whose
    # norm has collapsed below the representable floor of the matrix are
    # deflated outright: their direction is pure cancellation noise.
    tol = 1e-14
    deflate = 1e-15 * np.sqrt(float((e * e).sum()))
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                a = float(w[:, i] @ w[:, i])
                b = float(w[:, j] @ w[:, j])
                c = float(w[:, i] @ w[:, j])
                scale = np.sqrt(a * b)
                if min(a, b) <= deflate * deflate or abs(c) <= tol * scale:
                    continue
                off = max(off, abs(c) / scale)
                zeta = (b - a) / (2.0 * c)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                if zeta == 0.0:
                    t = 1.0
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                wi = w[:, i].copy()
                w[:, i] = cs * wi - sn * w[:, j]
                w[:, j] = sn * wi + cs * w[:, j]
                qi = q[:, i].copy()
                q[:, i] = cs * qi - sn * q[:, j]
                q[:, j] = sn * qi + cs * q[:, j]
        if off == 0.0:
            break
    else:
        raise NoConvergenceError(f"jacobi sweeps exceeded budget ({max_sweeps})")
    sigma = np.sqrt(np.einsum("ij,ij->j", w, w))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    w = w[:, order]
    q = q[:, order]
    smax = sigma[0] if sigma.size else 0.0
    cutoff = 1e-13 * max(smax, 1e-300)
    p = np.zeros((n, n))
    rank = 0
    for k in range(n):
        if sigma[k] > cutoff:
            p[:, k] = w[:, k] / sigma[k]
            rank = k + 1
        else:
            sigma[k] = 0.0
    sigma[rank:] = 0.0
    _orthonormal_fill(p, rank)
    return p, sigma, q


def quadrature_periodic(
    h: Callable[[float], np.ndarray], period: float, n: int = 64
) -> np.ndarray:
    """Average ``(1/T) * integral_0^T h(t) dt`` of a T-periodic integrand.

    Uses the uniform rectangle rule, which coincides with the composite
    trapezoid rule for periodic integrands and is spectrally accurate:
    exact (to roundoff) on trigonometric polynomials of degree < n/2.
    """
    if n < 8:
        raise ValueError("need at least 8 quadrature nodes")
    acc = None
    for k in range(n):
        val = np.asarray(h(k * period / n), dtype=float)
        acc = val.copy() if acc is None else acc + val
    return acc / n


def rk4_step(
    field: Callable[[float, np.ndarray], np.ndarray],
    t: float,
    u: np.ndarray,
    h: float,
) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of size ``h``."""
    u = np.asarray(u, dtype=float)
    k1 = np.asarray(field(t, u), dtype=float)
    k2 = np.asarray(field(t + 0.5 * h, u + 0.5 * h * k1), dtype=float)
    k3 = np.asarray(field(t + 0.5 * h, u + 0.5 * h * k2), dtype=float)
    k4 = np.asarray(field(t + h, u + h * k3), dtype=float)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
