"""
Full-system stochastic Schroedinger equations (pure states).

Per mode, with c_k = sqrt(2 kappa_k) a_k:

homodyne     (kappa <X> a - kappa/4 <X>^2) psi dt + (sqrt(2k) a - sqrt(2k) <X> / 2) psi dW
heterodyne   (2 kappa <a^dag> a - kappa |<a>|^2) psi dt + sqrt(2k)(a - <a>) psi dW_c
photodetect  kappa <a^dag a> psi dt between jumps, psi -> a psi / |a psi| at a jump

on top of (-i H_AC - sum_k kappa_k a_k^dag a_k) psi dt. Increments are read in
mode order, one per mode per step.
"""
import logging
from typing import Optional, Sequence

import numpy as np

from app.core.errors import JumpFromEmptyModeError, NotAStateError, UnsupportedError
from app.heom.modes import Detection
from app.noise.streams import JumpClock
from app.oracle.system import FullState, FullSystem, check_leakage

logger = logging.getLogger(__name__)

EMPTY_MODE_RATE = 1e-12


def _normalized(psi: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(psi))
    if not np.isfinite(norm) or norm == 0.0:
        raise NotAStateError("state vector collapsed to zero norm")
    return psi / norm


def sse_step(
    state: FullState,
    system: FullSystem,
    dt: float,
    increments: Sequence,
    check_cutoff: bool = True,
) -> FullState:
    """One Euler-Maruyama step for any mix of homodyne, heterodyne and photodetected modes."""
    if not state.is_pure:
        raise NotAStateError("SSE step needs a state vector")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    psi = state.data
    H = system.hamiltonian
    drift = -1j * (H @ psi)
    noise = np.zeros_like(psi)
    for k, mode in enumerate(system.modes):
        a = system.a_ops[k]
        a_psi = a @ psi
        drift -= mode.kappa * (a.conj().T @ a_psi)
        s = mode.sqrt_2kappa
        if mode.detection == Detection.HOMODYNE:
            mean_a = np.vdot(psi, a_psi)
            x = 2 * mean_a.real
            drift += mode.kappa * x * a_psi - 0.25 * mode.kappa * x ** 2 * psi
            noise += (s * a_psi - 0.5 * s * x * psi) * increments[k]
        elif mode.detection == Detection.HETERODYNE:
            mean_a = np.vdot(psi, a_psi)
            drift += 2 * mode.kappa * np.conj(mean_a) * a_psi - mode.kappa * abs(mean_a) ** 2 * psi
            noise += s * (a_psi - mean_a * psi) * increments[k]
        elif mode.detection == Detection.PHOTODETECT:
            drift += mode.kappa * float(np.vdot(a_psi, a_psi).real) * psi
        else:
            raise UnsupportedError("unmonitored modes need the density-matrix oracle")
    new = FullState(_normalized(psi + drift * dt + noise), state.time + dt)
    if check_cutoff:
        check_leakage(new, system)
    return new


def sse_homodyne_step(state: FullState, system: FullSystem, dt: float, dW: Sequence[float], check_cutoff: bool = True) -> FullState:
    return sse_step(state, system, dt, dW, check_cutoff)


def sse_heterodyne_step(state: FullState, system: FullSystem, dt: float, dW_c: Sequence[complex], check_cutoff: bool = True) -> FullState:
    return sse_step(state, system, dt, dW_c, check_cutoff)


def photon_number(state: FullState, system: FullSystem, k: int) -> float:
    a = system.a_ops[k]
    return state.expect(a.conj().T @ a).real


def jump(state: FullState, system: FullSystem, k: int) -> FullState:
    """The mode loses one photon: psi -> a psi / |a psi| (rho -> a rho a^dag / tr)."""
    if 2 * system.modes[k].kappa * photon_number(state, system, k) < EMPTY_MODE_RATE:
        raise JumpFromEmptyModeError(f"jump from empty mode {k} at t={state.time:.6g}")
    a = system.a_ops[k]
    if state.is_pure:
        return FullState(_normalized(a @ state.data), state.time)
    rho = a @ state.data @ a.conj().T
    return FullState(rho / np.trace(rho).real, state.time)


def sse_jump_step(
    state: FullState,
    system: FullSystem,
    dt: float,
    clocks: dict[int, JumpClock],
    increments: Optional[Sequence] = None,
    check_cutoff: bool = True,
) -> tuple[FullState, list[bool]]:
    """
    Photon-counting step; rates at the pre-step state, jumps after the
    no-jump update, thresholds consumed by the clocks.
    """
    if increments is None:
        increments = [0.0] * len(system.modes)
    fired = [False] * len(system.modes)
    for k, clock in clocks.items():
        fired[k] = clock.advance(2 * system.modes[k].kappa * photon_number(state, system, k), dt)
    new = sse_step(state, system, dt, increments, check_cutoff)
    for k, hit in enumerate(fired):
        if hit:
            new = jump(new, system, k)
    return new, fired
