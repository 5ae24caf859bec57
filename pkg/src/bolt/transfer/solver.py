from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import SolverError
from .fem import BlockSystem, cell_deformation, volume_bias

log = logging.getLogger(__name__)


def conjugate_gradient(M, b, tol=1e-6, max_iter=5000, x0=None):
    """Jacobi-preconditioned CG on a symmetric positive definite sparse matrix.

    Stops when ``|r| <= tol * |b|``. Returns ``(x, iterations, relative_residual)``.
    """
    b = np.asarray(b, float)
    n = len(b)
    x = np.zeros(n) if x0 is None else np.array(x0, float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    diag = M.diagonal()
    if np.any(diag <= 0):
        raise SolverError("system matrix has a non-positive diagonal", np.inf, 0)
    inv_d = 1.0 / diag
    r = b - M @ x
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / bnorm
    it = 0
    while res > tol:
        if it >= max_iter:
            raise SolverError(f"CG did not converge in {max_iter} iterations "
                              f"(relative residual {res:.3e})", res, it)
        Mp = M @ p
        pMp = p @ Mp
        if not pMp > 0:
            raise SolverError("CG hit a non-positive curvature direction", res, it)
        alpha = rz / pMp
        x += alpha * p
        r -= alpha * Mp
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        res = np.linalg.norm(r) / bnorm
        it += 1
        if not np.isfinite(res):
            raise SolverError("CG residual became non-finite", res, it)
    return x, it, float(res)


def solve_schur(system: BlockSystem, k, tol=1e-6, max_iter=5000, x0=None, schur=None):
    """Displacement and pressure from the pressure-eliminated system."""
    S = system.schur_matrix() if schur is None else schur
    u, it, res = conjugate_gradient(S, system.schur_rhs(k), tol, max_iter, x0)
    return u, system.pressure(u, k), it, res


@dataclass
class FixedPointInfo:
    iterations: int = 0
    cg_iterations: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    converged: bool = False
    min_volume_ratio: float = 1.0


def fixed_point_solve(grid, system: BlockSystem, tol=1e-4, max_iter=20, cg_tol=1e-6,
                      cg_max_iter=5000):
    """Re-solve with the nonlinear volume bias until the displacement stops changing.

    A cell that compresses at any iterate keeps its bias for the rest of the
    solve; letting cells drop out again makes the iteration cycle. Stops when
    the displacement update or the bias update (per unit cell volume) falls
    below ``tol``. Returns ``(u, p, info)`` with ``u`` shaped (n_nodes, 3).
    """
    S = system.schur_matrix()
    k = np.zeros(grid.n_cells)
    active = np.zeros(grid.n_cells, dtype=bool)
    info = FixedPointInfo()
    u = None
    for it in range(max_iter):
        u_new, p, n_cg, res = solve_schur(system, k, cg_tol, cg_max_iter,
                                          x0=None if u is None else u, schur=S)
        info.cg_iterations.append(n_cg)
        info.residuals.append(res)
        info.iterations = it + 1
        if not np.all(np.isfinite(u_new)):
            raise SolverError(f"transfer displacement became non-finite at iteration {it + 1}",
                              res, it + 1)
        delta = np.inf if u is None else float(np.abs(u_new - u).max())
        u = u_new
        J = np.linalg.det(cell_deformation(grid, u.reshape(-1, 3)))
        active |= J < 1.0
        k_new, _ = volume_bias(grid, u.reshape(-1, 3), system.B, active)
        info.min_volume_ratio = float(J.min())
        bias_change = float(np.abs(k_new - k).max()) / grid.cell_volume
        if delta < tol or bias_change < tol:
            info.converged = True
            break
        k = k_new
    else:
        log.warning("volume fixed point stopped after %d iterations", max_iter)
    return u.reshape(-1, 3), p, info
