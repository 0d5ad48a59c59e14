"""Problem model and the fixed-frame coordinate change.

A first-order problem couples ``dx/dt = H x + lam * f(t, x, y)`` with the
moving constraint ``g(A(t) x, B(t) y) = 0`` (``H`` optional, commuting
with ``A``); the second-order variant drives ``d2x/dt2`` and lets ``f``
see velocities.  The coordinate change ``xi = A(t) x``, ``eta = B(t) y``
renders the constraint autonomous at the price of constant drift terms
built from the audited frame product ``M = mean(A @ dA.T)``:

- order 1: ``dxi/dt  = (H - M) xi + lam * F(t, xi, eta)``
- order 2: ``d2xi/dt2 = (H1 M + H2 - M^2) xi + (H1 - 2M) dxi/dt + lam * F``

with ``F`` the frame-conjugated forcing.  Back-maps invert the change
pointwise: ``x = A(t).T xi``, ``y = B(t)^{-1} eta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import HypothesisViolatedError
from .linalg import fd_jacobian, norm_inf, solve_linear
from .paths import MatrixPath, frame_audit, inverse_derivative

__all__ = [
    "DaeProblem1",
    "DaeProblem2",
    "TransformedSystem",
    "fixed_frame_first",
    "fixed_frame_second",
    "c_frame_drifts",
    "pull_back",
    "push_forward",
]

PERIODICITY_TOL = 1e-9


@dataclass
class DaeProblem1:
    """First-order parametrized DAE with a moving constraint.

    ``f(t, x, y)`` is the forcing (T-periodic in t), ``g(p, q)`` the
    constraint with invertible ``dg/dq``; ``A`` must be an orthogonal
    frame path with constant right product, ``B`` invertible.  ``d1g`` and
    ``d2g`` are the constraint Jacobian blocks; when omitted they are
    formed by forward differences.
    """

    m: int
    s: int
    period: float
    f: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    A: MatrixPath
    B: MatrixPath
    d1g: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    d2g: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    H: Optional[np.ndarray] = None
    name: str = ""
    frame_suitable: bool = True

    order: int = field(default=1, init=False, repr=False)

    def g_jac1(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        if self.d1g is not None:
            return np.asarray(self.d1g(p, q), dtype=float)
        return fd_jacobian(lambda pp: np.atleast_1d(self.g(pp, q)), np.asarray(p, float))

    def g_jac2(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        if self.d2g is not None:
            return np.asarray(self.d2g(p, q), dtype=float)
        return fd_jacobian(lambda qq: np.atleast_1d(self.g(p, qq)), np.asarray(q, float))

    def drive(self, t: float, x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
        """Right-hand side of the differential part in original coordinates."""
        rhs = lam * np.asarray(self.f(t, x, y), dtype=float)
        if self.H is not None:
            rhs = rhs + self.H @ x
        return rhs


@dataclass
class DaeProblem2:
    """Second-order variant: ``f(t, x, y, xdot, ydot)``, drifts H1, H2."""

    m: int
    s: int
    period: float
    f: Callable
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    A: MatrixPath
    B: MatrixPath
    d1g: Optional[Callable] = None
    d2g: Optional[Callable] = None
    H1: Optional[np.ndarray] = None
    H2: Optional[np.ndarray] = None
    name: str = ""
    frame_suitable: bool = True

    order: int = field(default=2, init=False, repr=False)

    g_jac1 = DaeProblem1.g_jac1
    g_jac2 = DaeProblem1.g_jac2

    def drive(self, t, x, y, xdot, ydot, lam):
        rhs = lam * np.asarray(self.f(t, x, y, xdot, ydot), dtype=float)
        if self.H1 is not None:
            rhs = rhs + self.H1 @ xdot
        if self.H2 is not None:
            rhs = rhs + self.H2 @ x
        return rhs


def _check_frame(prob, grid: int, tol: Optional[float]):
    audit = frame_audit(prob.A, grid, tol)
    if audit.orthogonality > audit.tol:
        raise HypothesisViolatedError(
            f"frame path is not orthogonal: residual {audit.orthogonality:.3e} > {audit.tol:.1e}"
        )
    if audit.right_constancy > audit.tol:
        raise HypothesisViolatedError(
            f"frame product is not constant: residual {audit.right_constancy:.3e} > {audit.tol:.1e}"
        )
    for path, label in ((prob.A, "A"), (prob.B, "B")):
        res = path.periodicity_residual()
        if res > PERIODICITY_TOL:
            raise HypothesisViolatedError(
                f"path {label} is not {prob.period}-periodic: residual {res:.3e}"
            )
    return audit


def _check_commutation(h: np.ndarray, path: MatrixPath, grid: int, tol: float, label: str):
    worst = 0.0
    for k in range(grid):
        t = k * path.period / grid
        a = path(t)
        worst = max(worst, norm_inf(h @ a - a @ h))
    if worst > tol:
        raise HypothesisViolatedError(
            f"{label} does not commute with the frame path: residual {worst:.3e} > {tol:.1e}"
        )


@dataclass
class TransformedSystem:
    """Fixed-frame form of a problem: autonomous constraint, constant drifts.

    ``D0`` multiplies the state, ``D1`` (order 2 only) the velocity; ``F``
    is the conjugated forcing, called as ``F(t, xi, eta)`` for order 1 and
    ``F(t, xi, eta, u, v)`` for order 2.
    """

    order: int
    m: int
    s: int
    period: float
    D0: np.ndarray
    D1: Optional[np.ndarray]
    F: Callable
    g: Callable
    g_jac1: Callable
    g_jac2: Callable
    A: MatrixPath
    B: MatrixPath
    M: np.ndarray
    problem: object = None

    def pull_back_point(self, t: float, xi: np.ndarray, eta: np.ndarray):
        x = self.A(t).T @ xi
        y = solve_linear(self.B(t), eta)
        return x, y

    def push_forward_point(self, t: float, x: np.ndarray, y: np.ndarray):
        return self.A(t) @ x, self.B(t) @ y


def fixed_frame_first(
    prob: DaeProblem1,
    grid: int = 64,
    tol: Optional[float] = None,
    *,
    validate: bool = True,
) -> TransformedSystem:
    """Transform a first-order problem into its fixed-frame form.

    Audits the frame hypotheses (orthogonality, product constancy,
    periodicity, commutation of ``H``) unless ``validate=False``; the
    audited grid mean ``M`` feeds the drift ``D0 = H - M``.
    """
    if validate:
        audit = _check_frame(prob, grid, tol)
    else:
        audit = frame_audit(prob.A, grid, tol)
    m_mat = audit.M
    h = np.zeros((prob.m, prob.m)) if prob.H is None else np.asarray(prob.H, dtype=float)
    if validate and prob.H is not None:
        _check_commutation(h, prob.A, grid, audit.tol, "H")
    d0 = h - m_mat
    a_path, b_path, f = prob.A, prob.B, prob.f

    def forcing(t, xi, eta):
        a = a_path(t)
        return a @ np.asarray(f(t, a.T @ xi, solve_linear(b_path(t), eta)), dtype=float)

    return TransformedSystem(
        order=1,
        m=prob.m,
        s=prob.s,
        period=prob.period,
        D0=d0,
        D1=None,
        F=forcing,
        g=prob.g,
        g_jac1=prob.g_jac1,
        g_jac2=prob.g_jac2,
        A=prob.A,
        B=prob.B,
        M=m_mat,
        problem=prob,
    )


def fixed_frame_second(
    prob: DaeProblem2,
    grid: int = 64,
    tol: Optional[float] = None,
    *,
    validate: bool = True,
) -> TransformedSystem:
    """Transform a second-order problem into its fixed-frame form.

    The second-derivative product ``A @ d2A.T`` of an orthogonal path
    with constant product equals ``M^2``, which is what the drift
    formulas use: ``D0 = H1 M + H2 - M^2`` and ``D1 = H1 - 2M``.
    """
    if validate:
        audit = _check_frame(prob, grid, tol)
    else:
        audit = frame_audit(prob.A, grid, tol)
    m_mat = audit.M
    m2 = m_mat @ m_mat
    h1 = np.zeros((prob.m, prob.m)) if prob.H1 is None else np.asarray(prob.H1, dtype=float)
    h2 = np.zeros((prob.m, prob.m)) if prob.H2 is None else np.asarray(prob.H2, dtype=float)
    if validate:
        if prob.H1 is not None:
            _check_commutation(h1, prob.A, grid, audit.tol, "H1")
        if prob.H2 is not None:
            _check_commutation(h2, prob.A, grid, audit.tol, "H2")
    d0 = h1 @ m_mat + h2 - m2
    d1 = h1 - 2.0 * m_mat
    a_path, b_path, f = prob.A, prob.B, prob.f

    def forcing(t, xi, eta, u, v):
        a = a_path(t)
        da = a_path(t, 1)
        b = b_path(t)
        x = a.T @ xi
        y = solve_linear(b, eta)
        xdot = da.T @ xi + a.T @ u
        ydot = inverse_derivative(b_path, t) @ eta + solve_linear(b, v)
        return a @ np.asarray(f(t, x, y, xdot, ydot), dtype=float)

    return TransformedSystem(
        order=2,
        m=prob.m,
        s=prob.s,
        period=prob.period,
        D0=d0,
        D1=d1,
        F=forcing,
        g=prob.g,
        g_jac1=prob.g_jac1,
        g_jac2=prob.g_jac2,
        A=prob.A,
        B=prob.B,
        M=m_mat,
        problem=prob,
    )


def c_frame_drifts(c_path: MatrixPath, grid: int = 64, tol: Optional[float] = None):
    """Constant drifts induced by differentiating ``C(t) x`` twice in time.

    For an orthogonal path with constant products, ``K1 = mean(C.T @ dC)``
    is constant and ``C.T @ d2C`` equals ``-K1^2``; expanding
    ``d2/dt2 (C x)`` then yields the drift pair ``H1 = -2 K1`` and
    ``H2 = K1^2``, both commuting with any matrix that commutes with K1.
    """
    audit = frame_audit(c_path, grid, tol)
    if audit.orthogonality > audit.tol or audit.right_constancy > audit.tol:
        raise HypothesisViolatedError(
            f"drift path fails the frame audit: orthogonality {audit.orthogonality:.3e}, "
            f"constancy {audit.right_constancy:.3e} (tol {audit.tol:.1e})"
        )
    k1 = audit.K
    return -2.0 * k1, k1 @ k1


def pull_back(times, xi_nodes, eta_nodes, a_path: MatrixPath, b_path: MatrixPath):
    """Map a fixed-frame trajectory back to original coordinates.

    Pointwise ``x = A(t).T xi`` and ``y = B(t)^{-1} eta``; T-periodicity
    of the input survives because the paths are T-periodic.
    """
    times = np.asarray(times, dtype=float)
    xi_nodes = np.atleast_2d(np.asarray(xi_nodes, dtype=float))
    eta_nodes = np.atleast_2d(np.asarray(eta_nodes, dtype=float))
    x_nodes = np.empty_like(xi_nodes)
    y_nodes = np.empty_like(eta_nodes)
    for k, t in enumerate(times):
        x_nodes[k] = a_path(t).T @ xi_nodes[k]
        y_nodes[k] = solve_linear(b_path(t), eta_nodes[k])
    return x_nodes, y_nodes


def push_forward(times, x_nodes, y_nodes, a_path: MatrixPath, b_path: MatrixPath):
    """Inverse of :func:`pull_back`: ``xi = A(t) x``, ``eta = B(t) y``."""
    times = np.asarray(times, dtype=float)
    x_nodes = np.atleast_2d(np.asarray(x_nodes, dtype=float))
    y_nodes = np.atleast_2d(np.asarray(y_nodes, dtype=float))
    xi_nodes = np.empty_like(x_nodes)
    eta_nodes = np.empty_like(y_nodes)
    for k, t in enumerate(times):
        xi_nodes[k] = a_path(t) @ x_nodes[k]
        eta_nodes[k] = b_path(t) @ y_nodes[k]
    return xi_nodes, eta_nodes
