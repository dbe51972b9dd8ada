"""
Measurement terms of the hierarchy: expectation values read off the
auxiliaries, homodyne / heterodyne innovations and the photodetection
no-jump terms and jump rule.

Auxiliary matrices relate to the full atom-cavity state as
rho^(n,m) = (i g)^n (-i g)^m tr_C(a^n rho_AC (a^dag)^m), so traces give
normally ordered moments <(a^dag)^m a^n>.
"""
import logging
from typing import Sequence

import numpy as np

from app.core.errors import JumpFromEmptyModeError, NotAStateError, TruncationError, UnsupportedError
from app.heom.hierarchy import HierarchyState
from app.heom.indices import MultiIndex
from app.heom.modes import Detection, ModeSpec

logger = logging.getLogger(__name__)

IMAG_RESIDUE_TOL = 1e-8
EMPTY_MODE_RATE = 1e-12
HETERODYNE_SIGN = -1


def _trace(stack: np.ndarray) -> np.ndarray:
    return np.trace(stack, axis1=-2, axis2=-1)


def quadrature_expectation(state: HierarchyState, modes: Sequence[ModeSpec], k: int) -> float:
    """<X_k> = <a_k + a_k^dag> = tr(rho^(e_k,0) - rho^(0,e_k)) / (i g_k)."""
    p10, p01 = state.structure.first_level(k)
    g = modes[k].g
    if g == 0.0:
        return 0.0
    value = complex(np.trace(state.matrices[p10] - state.matrices[p01])) / (1j * g) / state.trace.real
    if abs(value.imag) > IMAG_RESIDUE_TOL * max(1.0, abs(value.real)):
        raise NotAStateError(f"<X_{k}> has imaginary part {value.imag:.3g}; Hermitian pairing is broken")
    return value.real


def mean_field(state: HierarchyState, modes: Sequence[ModeSpec], k: int) -> complex:
    """<a_k> = tr rho^(e_k,0) / (i g_k)."""
    p10, _ = state.structure.first_level(k)
    g = modes[k].g
    if g == 0.0:
        return 0j
    return complex(np.trace(state.matrices[p10])) / (1j * g) / state.trace.real


def moments(state: HierarchyState, n: Sequence[int], m: Sequence[int], modes: Sequence[ModeSpec]) -> complex:
    """
    tr rho^(n,m) / prod_k (i g_k)^n_k (-i g_k)^m_k.

    With the auxiliary definition above this equals the normally ordered
    moment <prod_k (a_k^dag)^m_k a_k^n_k>.
    """
    index = MultiIndex(tuple(int(v) for v in n), tuple(int(v) for v in m))
    pos = state.structure.index_of(index)
    scale = 1.0 + 0j
    for k, mode in enumerate(modes):
        if index.n[k] + index.m[k] == 0:
            continue
        if mode.g == 0.0:
            raise UnsupportedError(f"moments of mode {k} are undefined for zero coupling")
        scale *= (1j * mode.g) ** index.n[k] * (-1j * mode.g) ** index.m[k]
    return complex(np.trace(state.matrices[pos])) / scale / state.trace.real


def photon_number(state: HierarchyState, modes: Sequence[ModeSpec], k: int, theta: int = 0) -> float:
    """<a_k^dag a_k>_N = tr rho^(e_k,e_k) / g_k^2 - theta."""
    if state.k_max < 2:
        raise TruncationError("photon number needs k_max >= 2")
    g = modes[k].g
    if g == 0.0:
        return 0.0
    pos = state.structure.up_nm[k, 0]
    return float(np.trace(state.matrices[pos]).real) / g ** 2 / state.trace.real - theta


def total_photon_number(state: HierarchyState, modes: Sequence[ModeSpec], theta: int = 0) -> float:
    return sum(photon_number(state, modes, k, theta) for k in range(len(modes)))


def _upper_neighbors(state: HierarchyState, P: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    size = state.structure.size
    return P[state.structure.up_n[k, :size]], P[state.structure.up_m[k, :size]]


def homodyne_stochastic_term(state: HierarchyState, modes: Sequence[ModeSpec], dW: Sequence[float]) -> np.ndarray:
    """
    Sum over homodyne modes of

        [-sqrt(2k) <X_k> rho + (i / g_k) sqrt(2k) (rho^(n,m+e_k) - rho^(n+e_k,m))] dW_k
    """
    out = np.zeros_like(state.matrices)
    P = None
    for k, mode in enumerate(modes):
        if mode.detection != Detection.HOMODYNE or mode.g == 0.0 or dW[k] == 0.0:
            continue
        if P is None:
            P = state.padded()
        upper_n, upper_m = _upper_neighbors(state, P, k)
        x = quadrature_expectation(state, modes, k)
        s = mode.sqrt_2kappa
        out += (-s * x * state.matrices + (1j * s / mode.g) * (upper_m - upper_n)) * dW[k]
    return out


def homodyne_current(state: HierarchyState, modes: Sequence[ModeSpec], k: int, dW: float, dt: float) -> float:
    """J_hom = sqrt(2 kappa) <X> + dW / dt."""
    return modes[k].sqrt_2kappa * quadrature_expectation(state, modes, k) + dW / dt


def heterodyne_stochastic_term(
    state: HierarchyState,
    modes: Sequence[ModeSpec],
    dW_c: Sequence[complex],
    sign: int = HETERODYNE_SIGN,
) -> np.ndarray:
    """
    Sum over heterodyne modes of

        sqrt(2k)(-<a> dW - <a^dag> dW*) rho
        + (i sqrt(2k) / g)(rho^(n,m+e_k) dW* + sign * rho^(n+e_k,m) dW)

    ``sign = -1`` is the trace-preserving pairing.
    """
    out = np.zeros_like(state.matrices)
    P = None
    for k, mode in enumerate(modes):
        if mode.detection != Detection.HETERODYNE or mode.g == 0.0 or dW_c[k] == 0:
            continue
        if P is None:
            P = state.padded()
        upper_n, upper_m = _upper_neighbors(state, P, k)
        a = mean_field(state, modes, k)
        dw = complex(dW_c[k])
        s = mode.sqrt_2kappa
        out += s * (-a * dw - np.conj(a) * np.conj(dw)) * state.matrices
        out += (1j * s / mode.g) * (upper_m * np.conj(dw) + sign * upper_n * dw)
    return out


def heterodyne_current(state: HierarchyState, modes: Sequence[ModeSpec], k: int, dW_c: complex, dt: float) -> complex:
    """J_het = sqrt(2 kappa) <a> + dW_c / dt."""
    return modes[k].sqrt_2kappa * mean_field(state, modes, k) + dW_c / dt


def jump_rate(state: HierarchyState, modes: Sequence[ModeSpec], k: int, theta: int = 0) -> float:
    """2 kappa_k <a_k^dag a_k>_N."""
    return 2 * modes[k].kappa * photon_number(state, modes, k, theta)


def photodetect_no_jump_term(state: HierarchyState, modes: Sequence[ModeSpec], theta: int = 0) -> np.ndarray:
    """Sum over photodetected modes of 2k <a^dag a>_N rho - (2k / g^2) rho^(n+e_k, m+e_k); multiply by dt."""
    out = np.zeros_like(state.matrices)
    P = None
    size = state.structure.size
    for k, mode in enumerate(modes):
        if mode.detection != Detection.PHOTODETECT or mode.g == 0.0:
            continue
        if P is None:
            P = state.padded()
        upper = P[state.structure.up_nm[k, :size]]
        out += jump_rate(state, modes, k, theta) * state.matrices - (2 * mode.kappa / mode.g ** 2) * upper
    return out


def apply_jump(state: HierarchyState, modes: Sequence[ModeSpec], k: int, theta: int = 0) -> HierarchyState:
    """
    One photon lost from mode k: every rho^(n,m) is replaced by
    rho^(n+e_k, m+e_k) / (g_k^2 <a_k^dag a_k>_N), sources outside the
    truncation reading as zero. The result is renormalized.
    """
    occupation = photon_number(state, modes, k, theta)
    if 2 * modes[k].kappa * occupation < EMPTY_MODE_RATE:
        raise JumpFromEmptyModeError(f"jump from empty mode {k} at t={state.time:.6g} (<n> = {occupation:.3g})")
    size = state.structure.size
    shifted = state.padded()[state.structure.up_nm[k, :size]] / (modes[k].g ** 2 * occupation)
    logger.debug("photon detected in mode %d at t=%.6g", k, state.time)
    return state.replace(shifted).paired().renormalized()
