"""Scaled-form ADMM over the layout with tied-scale boundary edge energies."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import factorized

from .energy import BaseQuadratic, EdgeNeighborhoods

log = logging.getLogger(__name__)


@dataclass
class AdmmState:
    """Iterates of ``min E(x) + sum_i W_i(z_i)`` subject to ``D_i x = z_i``.

    ``z`` and ``u`` are (k, 4) per constrained vertex (stacked neighbor vectors
    and scaled duals), ``w`` the per-constraint penalty weights.
    """

    x: np.ndarray
    z: np.ndarray
    u: np.ndarray
    w: np.ndarray
    iterations: int = 0
    primal_history: list = field(default_factory=list)
    dual_history: list = field(default_factory=list)
    scales: np.ndarray | None = None
    converged: bool = False


def _to_stack(Dx):
    """(2k, 2) coordinate-major differences -> (k, 4) ``[z0x, z0y, z1x, z1y]``."""
    return Dx.reshape(-1, 4)


def _from_stack(z):
    return z.reshape(-1, 2)


def tied_prox(a, rest, L, w, group, n_groups):
    """Per group: argmin over z, S of ``sum 1/2 L|z - S r|^2 + 1/2 w|z - a|^2``."""
    c = L * w / (L + w)
    num = np.bincount(group, c * np.sum(rest * a, axis=1), minlength=n_groups)
    den = np.bincount(group, c * np.sum(rest * rest, axis=1), minlength=n_groups)
    S = num / den
    z = ((L * S[group])[:, None] * rest + w[:, None] * a) / (L + w)[:, None]
    return z, S


def admm_optimize(quad: BaseQuadratic, hood: EdgeNeighborhoods, x0, edge_weight=1.0,
                  penalty=10.0, max_iter=500, tol=1e-6, stall_window=50):
    """Minimize the frame energy plus edge energies.

    ``penalty`` scales the ADMM weights ``w_i = penalty * L_i``; ``edge_weight``
    multiplies the edge energies. Returns the final :class:`AdmmState`.
    """
    x = np.array(x0, dtype=float)
    n = len(x)
    if len(hood) == 0:
        x = sp.linalg.spsolve(quad.L.tocsc(), quad.b)
        return AdmmState(x, np.zeros((0, 4)), np.zeros((0, 4)), np.zeros(0), 1, [0.0], [0.0],
                         np.zeros(0), True)
    D = hood.selector(n)
    Lw = edge_weight * hood.length
    w = penalty * hood.length
    w_rows = np.repeat(w, 2)
    K = (quad.L + D.T @ sp.diags(w_rows) @ D).tocsc()
    solve = factorized(K)
    z = _to_stack(D @ x)
    u = np.zeros_like(z)
    state = AdmmState(x, z, u, w)
    scale = max(float(np.abs(quad.b).max()), float(np.abs(z).max()), 1.0)
    best = (np.inf, x.copy())
    since_best = 0
    for it in range(max_iter):
        rhs = quad.b + D.T @ (w_rows[:, None] * _from_stack(z - u))
        x = np.column_stack([solve(rhs[:, 0]), solve(rhs[:, 1])])
        Dx = _to_stack(D @ x)
        z_old = z
        z, S = tied_prox(Dx + u, hood.rest, Lw, w, hood.group, hood.n_groups)
        u = u + Dx - z
        primal = float(np.sqrt(np.sum((Dx - z) ** 2)))
        dual = float(np.sqrt(np.sum((D.T @ (w_rows[:, None] * _from_stack(z - z_old))) ** 2)))
        state.primal_history.append(primal)
        state.dual_history.append(dual)
        state.iterations = it + 1
        combined = primal + dual
        if combined < best[0]:
            best = (combined, x.copy())
            since_best = 0
        else:
            since_best += 1
        if primal < tol * scale and dual < tol * scale:
            state.converged = True
            break
        if since_best >= stall_window:
            log.warning("ADMM residual has not improved for %d iterations; keeping the best iterate",
                        stall_window)
            x = best[1]
            break
    state.x, state.z, state.u, state.scales = x, z, u, S
    return state
