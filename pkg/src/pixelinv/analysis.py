"""Inverse-problem diagnostics: residuals, reconstruction, spectra.

The routines here quantify how hard the coefficient problem is: the
data-misfit residual and its gradient, a damped Gauss-Newton
(Levenberg-Marquardt) reconstruction loop, the condition number of the
flattened measurement Jacobian, and Loewner-order helpers built on a
cyclic Jacobi eigensolver. The eigen/singular-value kernels are written
out explicitly (rotation-based, deterministic) and are cross-checked
against dense library decompositions in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forward import JacobianStack, forward_matrix, forward_pairs

__all__ = [
    "ResidualProblem",
    "SymmetricLayout",
    "PairLayout",
    "SpectralReport",
    "RankDeficientError",
    "ReconstructionError",
    "residual",
    "reconstruct_lm",
    "condition_number",
    "loewner_min_eig",
    "symmetric_eigenvalues",
    "singular_values",
]

RANK_DEFICIENCY_RATIO = 1e-14


# ---------------------------------------------------------------------------
# measurement layouts and the residual functional


@dataclass(frozen=True, eq=False)
class SymmetricLayout:
    """Same functionals as excitations and measurements; matrix-valued data."""

    loads: list

    def evaluate(self, stiffness, sigma, tol, max_iter):
        F, jac = forward_matrix(stiffness, sigma, self.loads, tol=tol, max_iter=max_iter)
        return F.values.ravel(), jac.flattened()

    def data_shape(self):
        m = len(self.loads)
        return (m, m)


@dataclass(frozen=True, eq=False)
class PairLayout:
    """Explicit (excitation, measurement) pairs; plain vector of data."""

    pairs: list

    def evaluate(self, stiffness, sigma, tol, max_iter):
        return forward_pairs(stiffness, sigma, self.pairs, tol=tol, max_iter=max_iter)

    def data_shape(self):
        return (len(self.pairs),)


@dataclass(frozen=True, eq=False)
class ResidualProblem:
    """Data-misfit problem ``min ||F(sigma) - data||^2`` over positive sigma.

    ``sigma_floor`` bounds the working domain away from zero; the
    reconstruction loop rejects any step crossing it.
    """

    stiffness: object
    layout: object
    data: np.ndarray
    sigma_floor: float = 1e-6
    tol: float = 1e-10
    max_iter: int | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape != self.layout.data_shape():
            raise ValueError(
                f"data shape {data.shape} does not match layout "
                f"{self.layout.data_shape()}"
            )
        object.__setattr__(self, "data", data)

    def misfit(self, sigma):
        """Residual vector and its Jacobian at ``sigma``."""
        values, jac = self.layout.evaluate(self.stiffness, sigma, self.tol, self.max_iter)
        return values - self.data.ravel(), jac


def residual(problem: ResidualProblem, sigma):
    """Squared misfit norm and its coefficient gradient.

    The gradient is the chain rule through the measurement Jacobian:
    twice the inner product of the misfit with each derivative slice.
    """
    r, jac = problem.misfit(sigma)
    return float(r @ r), 2.0 * (jac.T @ r)


class ReconstructionError(RuntimeError):
    """Raised when no acceptable reconstruction step can be found."""


def reconstruct_lm(
    problem: ResidualProblem,
    sigma0,
    max_iter: int = 100,
    lambda0: float = 1e-3,
    gtol: float = 1e-14,
    rtol: float = 1e-28,
    step_tol: float = 1e-12,
):
    """Levenberg-Marquardt minimization of the misfit over positive sigma.

    Damped normal equations with multiplicative ``diag(J^T J)`` scaling;
    the damping shrinks by 3 on accepted steps and doubles on rejected
    ones. Steps that fail to decrease the residual, or that push any
    coefficient to ``sigma_floor`` or below, are rejected. Ten consecutive
    rejections abort.

    Returns
    -------
    (sigma, trace)
        Final iterate and a list of per-step records; the residual values
        of accepted steps are non-increasing.
    """
    sigma = np.asarray(sigma0, dtype=float).copy()
    if np.any(sigma <= problem.sigma_floor):
        raise ValueError("starting point must be above the positivity floor")
    r, jac = problem.misfit(sigma)
    value = float(r @ r)
    damping = lambda0
    trace = [
        {"iteration": 0, "accepted": True, "residual": value, "damping": damping, "step_norm": 0.0}
    ]

    for iteration in range(1, max_iter + 1):
        gradient = 2.0 * (jac.T @ r)
        if value <= rtol or np.linalg.norm(gradient, np.inf) <= gtol:
            break
        JtJ = jac.T @ jac
        diag = np.diag(JtJ).copy()
        diag[diag <= 0] = max(diag.max(), np.finfo(float).tiny)

        rejections = 0
        while True:
            step = np.linalg.solve(JtJ + damping * np.diag(diag), -(jac.T @ r))
            candidate = sigma + step
            ok = bool(np.all(candidate > problem.sigma_floor))
            if ok:
                r_new, jac_new = problem.misfit(candidate)
                value_new = float(r_new @ r_new)
                ok = value_new <= value
            if ok:
                sigma, r, jac, value = candidate, r_new, jac_new, value_new
                damping /= 3.0
                trace.append(
                    {
                        "iteration": iteration,
                        "accepted": True,
                        "residual": value,
                        "damping": damping,
                        "step_norm": float(np.linalg.norm(step)),
                    }
                )
                break
            damping *= 2.0
            rejections += 1
            trace.append(
                {
                    "iteration": iteration,
                    "accepted": False,
                    "residual": value,
                    "damping": damping,
                    "step_norm": float(np.linalg.norm(step)),
                }
            )
            if rejections >= 10:
                raise ReconstructionError(
                    f"no acceptable step after {rejections} damping increases "
                    f"at iteration {iteration} (residual {value:.3e})"
                )
        if trace[-1]["step_norm"] <= step_tol * (1.0 + float(np.linalg.norm(sigma))):
            break

    return sigma, trace


# ---------------------------------------------------------------------------
# rotation-based spectral kernels


def symmetric_eigenvalues(matrix, sweep_tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.

    Sweeps annihilate off-diagonal entries pairwise until their Frobenius
    norm falls below ``sweep_tol`` times the matrix norm, which bounds the
    eigenvalue error by the same amount.
    """
    A = np.array(matrix, dtype=float, copy=True)
    m = A.shape[0]
    if A.shape != (m, m):
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if m <= 1:
        return A.reshape(-1).copy()
    scale = float(np.linalg.norm(A))
    if scale == 0.0:
        return np.zeros(m)

    for _ in range(max_sweeps):
        off = float(np.linalg.norm(A - np.diag(np.diag(A))))
        if off <= sweep_tol * scale:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) if theta != 0 else 1.0
                t /= abs(theta) + np.sqrt(theta * theta + 1.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                A[p, q] = 0.0
                A[q, p] = 0.0
    return np.sort(np.diag(A))


def loewner_min_eig(matrix) -> float:
    """Smallest eigenvalue of a (numerically) symmetric matrix.

    The input is symmetrized before the eigensolve; gross asymmetry is
    rejected since comparing matrices in the semidefinite order is only
    meaningful for symmetric ones.
    """
    A = np.asarray(matrix, dtype=float)
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 0.0)
    asym = float(np.max(np.abs(A - A.T))) if A.size else 0.0
    if asym > 1e-9 * scale:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    sym = 0.5 * (A + A.T)
    eigs = symmetric_eigenvalues(sym)
    return float(eigs[0]) if eigs.size else 0.0


def singular_values(matrix, rel_tol: float = 1e-13, max_sweeps: int = 60) -> np.ndarray:
    """Singular values by one-sided Jacobi column orthogonalization, descending.

    Rotates column pairs until all are mutually orthogonal relative to
    ``rel_tol``; the singular values are then the column norms. Working on
    the matrix itself (never its Gram matrix) preserves small singular
    values far better, which matters for ill-conditioned Jacobians.
    """
    A = np.array(matrix, dtype=float, copy=True)
    if A.ndim != 2:
        raise ValueError(f"expected a 2D matrix, got shape {A.shape}")
    ncols = A.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(ncols - 1):
            for q in range(p + 1, ncols):
                app = float(A[:, p] @ A[:, p])
                aqq = float(A[:, q] @ A[:, q])
                apq = float(A[:, p] @ A[:, q])
                denom = np.sqrt(app * aqq)
                if denom == 0.0 or abs(apq) <= rel_tol * denom:
                    continue
                zeta = (aqq - app) / (2.0 * apq)
                t = np.sign(zeta) if zeta != 0 else 1.0
                t /= abs(zeta) + np.sqrt(zeta * zeta + 1.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                rotated = True
        if not rotated:
            break
    return np.sort(np.linalg.norm(A, axis=0))[::-1]


# ---------------------------------------------------------------------------
# condition numbers


class RankDeficientError(ValueError):
    """Raised when the Jacobian has an exactly vanishing singular value."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True, eq=False)
class SpectralReport:
    """Singular values (descending) and condition number of a Jacobian."""

    singular_values: np.ndarray
    condition: float
    rank_deficient: bool = field(default=False)


def condition_number(jac) -> SpectralReport:
    """Condition number of a flattened measurement Jacobian.

    Accepts a JacobianStack (flattened row-major to ``(m*m, n)``) or any
    2D array with at least as many rows as columns. A smallest singular
    value below ``1e-14`` times the largest marks the report as rank
    deficient (condition number infinity); an exact zero raises.
    """
    if isinstance(jac, JacobianStack):
        J = jac.flattened()
    else:
        J = np.asarray(jac, dtype=float)
    if J.ndim != 2:
        raise ValueError(f"expected a 2D Jacobian, got shape {J.shape}")
    rows, cols = J.shape
    if rows < cols:
        raise ValueError(f"Jacobian must have at least {cols} rows, got {rows}")
    s = singular_values(J)
    s_max, s_min = float(s[0]), float(s[-1])
    deficient = s_min <= RANK_DEFICIENCY_RATIO * s_max
    report = SpectralReport(
        singular_values=s,
        condition=np.inf if deficient else s_max / s_min,
        rank_deficient=deficient,
    )
    if s_min == 0.0:
        raise RankDeficientError("Jacobian is rank deficient (zero singular value)", report)
    return report
