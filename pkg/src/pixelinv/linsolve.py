"""Conjugate-gradient solver for the SPD systems behind every forward map.

A single primitive is exposed: Jacobi-preconditioned CG on a sparse
symmetric positive definite matrix, with a deterministic iteration (no
restarts, fixed summation order) so repeated runs are bit-identical. A
module-level counter tracks how many solves were performed, which lets
callers assert solve budgets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DEFAULT_TOL",
    "SolveReport",
    "SolverError",
    "solve_spd",
    "solve_multi",
    "solve_count",
]

DEFAULT_TOL = 1e-10

_solve_calls = 0


def solve_count() -> int:
    """Total number of solves performed so far (diagnostic, not thread-safe)."""
    return _solve_calls


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Solution plus convergence record of one SPD solve.

    ``residual_norm`` is the relative two-norm residual
    ``||B x - y|| / ||y||`` of the returned solution.
    """

    solution: np.ndarray
    iterations: int
    residual_norm: float


class SolverError(RuntimeError):
    """Raised when CG fails to reach the requested tolerance."""

    def __init__(self, message, residual_norm, iterations):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations


def _pcg(matrix, inv_diag, rhs, tol, max_iter, x0=None):
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return SolveReport(solution=np.zeros_like(rhs), iterations=0, residual_norm=0.0)

    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    r = rhs - matrix @ x if x.any() else rhs.copy()
    target = tol * rhs_norm

    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    iterations = 0
    while np.linalg.norm(r) > target and iterations < max_iter:
        Ap = matrix @ p
        alpha = rz / float(p @ Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        iterations += 1
        if np.linalg.norm(r) <= target:
            # Recurrence residuals can drift from the true one; recompute
            # and keep iterating on the exact residual if needed.
            true_r = rhs - matrix @ x
            if np.linalg.norm(true_r) <= target:
                break
            r = true_r
            z = inv_diag * r
            p = z.copy()
            rz = float(r @ z)
            continue
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    achieved = float(np.linalg.norm(rhs - matrix @ x) / rhs_norm)
    if achieved > tol:
        raise SolverError(
            f"CG did not reach tolerance {tol} within {max_iter} iterations "
            f"(achieved relative residual {achieved:.3e})",
            residual_norm=achieved,
            iterations=iterations,
        )
    return SolveReport(solution=x, iterations=iterations, residual_norm=achieved)


def _inverse_diagonal(matrix):
    d = matrix.diagonal()
    if np.any(d <= 0):
        raise ValueError("matrix diagonal has non-positive entries; not SPD")
    return 1.0 / d


def solve_spd(matrix, rhs, tol: float = DEFAULT_TOL, max_iter: int | None = None) -> SolveReport:
    """Solve ``matrix @ x = rhs`` by Jacobi-preconditioned CG.

    Parameters
    ----------
    matrix : sparse or dense symmetric positive definite matrix
    rhs : (N,) array
    tol : float
        Relative residual target; must be > 0.
    max_iter : int, optional
        Defaults to ``10 * N``.

    Raises
    ------
    SolverError
        On non-convergence; carries the achieved residual and iterations.
    """
    global _solve_calls
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    rhs = np.asarray(rhs, dtype=float).reshape(-1)
    if max_iter is None:
        max_iter = 10 * max(rhs.size, 1)
    _solve_calls += 1
    return _pcg(matrix, _inverse_diagonal(matrix), rhs, tol, max_iter)


def solve_multi(matrix, rhs_list, tol: float = DEFAULT_TOL, max_iter: int | None = None) -> list[SolveReport]:
    """Solve one SPD system for several right-hand sides.

    The preconditioner is prepared once; each right-hand side is solved
    independently. Failures identify the offending right-hand side.
    """
    global _solve_calls
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    inv_diag = _inverse_diagonal(matrix)
    reports = []
    for j, rhs in enumerate(rhs_list):
        rhs = np.asarray(rhs, dtype=float).reshape(-1)
        it_cap = 10 * max(rhs.size, 1) if max_iter is None else max_iter
        _solve_calls += 1
        try:
            reports.append(_pcg(matrix, inv_diag, rhs, tol, it_cap))
        except SolverError as err:
            raise SolverError(
                f"right-hand side {j + 1} of {len(rhs_list)}: {err}",
                residual_norm=err.residual_norm,
                iterations=err.iterations,
            ) from err
    return reports
