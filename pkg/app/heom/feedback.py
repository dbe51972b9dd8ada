"""
Instantaneous homodyne-current feedback H_fb = J_hom,k lambda(t) F.
"""
import logging
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from app.core.errors import FeedbackSingularError
from app.core.operators import OperatorMatrix, collective_spin
from app.heom.hierarchy import HierarchyState
from app.heom.modes import FeedbackSpec, ModeSpec

logger = logging.getLogger(__name__)

SINGULAR_JX = 1e-9


@lru_cache(maxsize=16)
def _spin_operators(dim: int) -> tuple[OperatorMatrix, OperatorMatrix]:
    n_atoms = dim - 1
    return collective_spin(n_atoms, "z"), collective_spin(n_atoms, "x")


def feedback_terms(
    state: HierarchyState,
    operator: OperatorMatrix,
    mode: ModeSpec,
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Split feedback contribution for F = ``operator`` acting on mode k.

    Returns:
        (deterministic rate, dW coefficient):
        F rho F - 1/2 {F^2, rho} + (sqrt(2k) / g)([rho^(n+e_k,m), F] + [F, rho^(n,m+e_k)])
        and -i [F, rho]
    """
    R = state.matrices
    F = operator
    F2 = F @ F
    rate = F @ R @ F - 0.5 * (F2 @ R + R @ F2)
    if mode.g != 0.0:
        size = state.structure.size
        P = state.padded()
        upper_n = P[state.structure.up_n[k, :size]]
        upper_m = P[state.structure.up_m[k, :size]]
        rate = rate + (mode.sqrt_2kappa / mode.g) * (upper_n @ F - F @ upper_n + F @ upper_m - upper_m @ F)
    noise = -1j * (F @ R - R @ F)
    return rate, noise


def feedback_increment(
    state: HierarchyState,
    fb: FeedbackSpec,
    modes: Sequence[ModeSpec],
    dW: float,
    dt: float,
    strength: float,
) -> np.ndarray:
    """Euler increment of the feedback terms with F = strength * fb.operator."""
    rate, noise = feedback_terms(state, strength * fb.operator, modes[fb.mode_index], fb.mode_index)
    return rate * dt + noise * dW


def jz_x_correlation(state: HierarchyState, g: float, jz: Optional[OperatorMatrix] = None) -> float:
    """<J_z X> = tr(J_z (rho^(1,0) - rho^(0,1))) / (i g)."""
    if jz is None:
        jz, _ = _spin_operators(state.dim)
    p10, p01 = state.structure.first_level(0)
    if g == 0.0:
        return 0.0
    value = complex(np.trace(jz @ (state.matrices[p10] - state.matrices[p01]))) / (1j * g)
    return value.real / state.trace.real


def dynamic_lambda(state: HierarchyState, kappa: float, g: float) -> float:
    """
    Strength that cancels the stochastic shift of <J_z>:
    lambda = 2 kappa <J_z X> / <J_x>, read from the hierarchy of a collective spin.
    """
    jz, jx = _spin_operators(state.dim)
    mean_jx = float(np.trace(jx @ state.physical).real) / state.trace.real
    if abs(mean_jx) < SINGULAR_JX:
        raise FeedbackSingularError(f"feedback singular: |<J_x>| = {abs(mean_jx):.3g} at t={state.time:.6g}")
    return 2 * kappa * jz_x_correlation(state, g, jz) / mean_jx


def resolve_strength(state: HierarchyState, fb: FeedbackSpec, modes: Sequence[ModeSpec]) -> float:
    """lambda at the pre-step state: the schedule value, or the dynamic rule."""
    if not fb.dynamic:
        return fb.schedule(state.time)
    mode = modes[fb.mode_index]
    try:
        return dynamic_lambda(state, mode.kappa, mode.g)
    except FeedbackSingularError:
        if not fb.hold_on_singular:
            raise
        logger.warning("holding feedback strength %.6g at t=%.6g (<J_x> vanished)", state.feedback_lambda, state.time)
        return state.feedback_lambda
