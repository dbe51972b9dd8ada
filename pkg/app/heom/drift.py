"""
Deterministic right-hand side of the multimode hierarchy.

For every retained (n, m):

    -i[H_A, rho] - (w.n + w*.m) rho
    + sum_k g_k^2 (n_k L_k rho^(n-e_k, m) + m_k rho^(n, m-e_k) L_k^dag)
    + [rho^(n+e_k, m), L_k^dag] + [L_k, rho^(n, m+e_k)]

with w_k = kappa_k + i Delta_k. Neighbors are gathered from the padded stack,
so the whole hierarchy is evaluated in a handful of batched matmuls.
"""
from typing import Sequence

import numpy as np

from app.core.errors import DimensionError
from app.core.operators import OperatorMatrix
from app.heom.hierarchy import HierarchyState
from app.heom.modes import ModeSpec


def check_operators(dim: int, H_A: OperatorMatrix, modes: Sequence[ModeSpec]) -> None:
    if H_A.shape != (dim, dim):
        raise DimensionError(f"H_A of shape {H_A.shape} does not act on the {dim}-dimensional atom space")
    for k, mode in enumerate(modes):
        if mode.coupling_op.shape != (dim, dim):
            raise DimensionError(f"coupling operator of mode {k} has shape {mode.coupling_op.shape}, expected {(dim, dim)}")


def heom_drift(state: HierarchyState, H_A: OperatorMatrix, modes: Sequence[ModeSpec]) -> np.ndarray:
    """d rho^(n,m)/dt without measurement terms; shape (K, d, d)."""
    if len(modes) != state.modes:
        raise DimensionError(f"{len(modes)} mode specs for a {state.modes}-mode hierarchy")
    check_operators(state.dim, H_A, modes)

    structure = state.structure
    size = structure.size
    R = state.matrices
    P = state.padded()

    out = -1j * (H_A @ R - R @ H_A)
    w = np.array([mode.w for mode in modes])
    damping = structure.n_counts @ w + structure.m_counts @ np.conj(w)
    out -= damping[:, None, None] * R

    for k, mode in enumerate(modes):
        L, Ld = mode.coupling_op, mode.coupling_dag
        g2 = mode.g ** 2
        if g2 != 0.0:
            lower_n = P[structure.down_n[k, :size]]
            lower_m = P[structure.down_m[k, :size]]
            out += g2 * structure.n_counts[:, k, None, None] * (L @ lower_n)
            out += g2 * structure.m_counts[:, k, None, None] * (lower_m @ Ld)
        upper_n = P[structure.up_n[k, :size]]
        upper_m = P[structure.up_m[k, :size]]
        out += upper_n @ Ld - Ld @ upper_n
        out += L @ upper_m - upper_m @ L
    return out
