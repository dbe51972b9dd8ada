"""
Time steppers for the conditioned hierarchy.

- ``step_ito``: Euler-Maruyama for homodyne, heterodyne and unmonitored modes,
  plus the no-jump terms of photodetected modes and optional feedback.
- ``photodetect_step``: ``step_ito`` followed by the jump rule for every
  photodetected mode whose waiting-time threshold was crossed.
- ``step_stratonovich``: Heun scheme driven by the measured homodyne current
  (single mode).
- ``integrate_average``: noise-free hierarchy (optionally with scheduled
  feedback) through ``scipy.integrate.solve_ivp``.

Every stochastic step ends with Hermitian pairing and renormalization of the
whole hierarchy by 1 / tr rho^(0,0).
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from app.core.errors import IntegrationDivergedError, UnsupportedError
from app.core.operators import OperatorMatrix
from app.heom.detection import (
    HETERODYNE_SIGN,
    apply_jump,
    heterodyne_stochastic_term,
    homodyne_stochastic_term,
    jump_rate,
    moments,
    photodetect_no_jump_term,
    quadrature_expectation,
)
from app.heom.drift import heom_drift
from app.heom.feedback import feedback_increment, feedback_terms, resolve_strength
from app.heom.hierarchy import HierarchyState
from app.heom.modes import Detection, FeedbackSpec, ModeSpec
from app.noise.streams import JumpClock

logger = logging.getLogger(__name__)


def _check_dt(dt: float) -> None:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")


def step_ito(
    state: HierarchyState,
    H_A: OperatorMatrix,
    modes: Sequence[ModeSpec],
    dt: float,
    increments: Sequence,
    feedback: Optional[FeedbackSpec] = None,
    theta: int = 0,
    heterodyne_sign: int = HETERODYNE_SIGN,
    averaged: bool = False,
) -> HierarchyState:
    """
    One Euler-Maruyama step.

    Args:
        increments: one entry per mode in mode order: real dW for homodyne,
            complex dW_c for heterodyne, ignored for photodetected/unmonitored
        averaged: drop every measurement term (standard, unconditioned hierarchy)

    Returns:
        the renormalized state at t + dt
    """
    _check_dt(dt)
    if len(increments) != len(modes):
        raise ValueError(f"{len(increments)} increments for {len(modes)} modes")

    delta = heom_drift(state, H_A, modes) * dt
    if not averaged:
        delta += homodyne_stochastic_term(state, modes, increments)
        delta += heterodyne_stochastic_term(state, modes, increments, heterodyne_sign)
        if any(mode.detection == Detection.PHOTODETECT for mode in modes):
            delta += photodetect_no_jump_term(state, modes, theta) * dt

    strength = state.feedback_lambda
    if feedback is not None:
        strength = resolve_strength(state, feedback, modes)
        dW = 0.0 if averaged else float(increments[feedback.mode_index])
        delta += feedback_increment(state, feedback, modes, dW, dt, strength)

    new = state.replace(state.matrices + delta, state.time + dt).paired().renormalized()
    new.feedback_lambda = strength
    return new


def photodetect_step(
    state: HierarchyState,
    H_A: OperatorMatrix,
    modes: Sequence[ModeSpec],
    dt: float,
    clocks: dict[int, JumpClock],
    increments: Optional[Sequence] = None,
    feedback: Optional[FeedbackSpec] = None,
    theta: int = 0,
    heterodyne_sign: int = HETERODYNE_SIGN,
) -> tuple[HierarchyState, list[bool]]:
    """
    Step with photon counting on the modes keyed in ``clocks``.

    Jump rates are taken at the pre-step state; a mode whose accumulated rate
    integral reaches its threshold jumps after the deterministic update.
    """
    if increments is None:
        increments = [0.0] * len(modes)
    fired = [False] * len(modes)
    for k, clock in clocks.items():
        fired[k] = clock.advance(jump_rate(state, modes, k, theta), dt)

    new = step_ito(state, H_A, modes, dt, increments, feedback, theta, heterodyne_sign)
    for k in range(len(modes)):
        if fired[k]:
            strength = new.feedback_lambda
            new = apply_jump(new, modes, k, theta)
            new.feedback_lambda = strength
    return new, fired


def _single_homodyne_mode(modes: Sequence[ModeSpec]) -> ModeSpec:
    if len(modes) != 1:
        raise UnsupportedError("Stratonovich path implemented single-mode only")
    if modes[0].detection != Detection.HOMODYNE:
        raise UnsupportedError("Stratonovich path needs a homodyne-monitored mode")
    return modes[0]


def stratonovich_normalization(state: HierarchyState, modes: Sequence[ModeSpec], current: float) -> complex:
    """N(t) = kappa(<a^dag a> + 1/2 <a^2 + a^dag^2>) - sqrt(kappa / 2) J <a + a^dag>."""
    mode = _single_homodyne_mode(modes)
    if mode.g == 0.0:
        return 0j
    n = moments(state, (1,), (1,), modes)
    squares = moments(state, (2,), (0,), modes) + moments(state, (0,), (2,), modes)
    x = quadrature_expectation(state, modes, 0)
    return mode.kappa * (n + 0.5 * squares) - np.sqrt(mode.kappa / 2) * current * x


def _stratonovich_rhs(
    state: HierarchyState,
    H_A: OperatorMatrix,
    modes: Sequence[ModeSpec],
    current: float,
) -> np.ndarray:
    mode = modes[0]
    rate = heom_drift(state, H_A, modes)
    if mode.g == 0.0:
        return rate
    structure = state.structure
    size = structure.size
    P = state.padded()
    up_n, up_m = structure.up_n[0], structure.up_m[0]
    s = mode.sqrt_2kappa
    rate += (1j * s / mode.g) * current * (P[up_m[:size]] - P[up_n[:size]])
    rate += (mode.kappa / mode.g ** 2) * (
        P[up_n[up_n[:size]]] + P[up_m[up_m[:size]]] - 2 * P[structure.up_nm[0, :size]]
    )
    rate += 2 * stratonovich_normalization(state, modes, current).real * state.matrices
    return rate


def step_stratonovich(
    state: HierarchyState,
    H_A: OperatorMatrix,
    modes: Sequence[ModeSpec],
    dt: float,
    current: float,
    feedback: Optional[FeedbackSpec] = None,
) -> HierarchyState:
    """
    Heun step with the homodyne current J held constant over the step.

    Feedback enters as the Hamiltonian J lambda F.
    """
    _check_dt(dt)
    _single_homodyne_mode(modes)
    strength = state.feedback_lambda
    H = H_A
    if feedback is not None:
        strength = resolve_strength(state, feedback, modes)
        H = H_A + current * strength * feedback.operator

    k1 = _stratonovich_rhs(state, H, modes, current)
    predictor = state.replace(state.matrices + k1 * dt, state.time + dt).paired()
    k2 = _stratonovich_rhs(predictor, H, modes, current)
    new = state.replace(state.matrices + 0.5 * (k1 + k2) * dt, state.time + dt).paired().renormalized()
    new.feedback_lambda = strength
    return new


@dataclass
class AverageSolution:
    times: np.ndarray
    physical: np.ndarray
    final: HierarchyState
    records: list = field(default_factory=list)


def integrate_average(
    state: HierarchyState,
    H_A: OperatorMatrix,
    modes: Sequence[ModeSpec],
    t_grid: Sequence[float],
    feedback: Optional[FeedbackSpec] = None,
    observe: Optional[Callable[[HierarchyState], dict]] = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> AverageSolution:
    """
    Noise-free hierarchy on ``t_grid`` with DOP853.

    Scheduled feedback contributes its deterministic terms; the integration
    restarts at every switching time of the schedule.
    """
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or len(times) < 1 or np.any(np.diff(times) <= 0):
        raise ValueError("t_grid must be a nonempty ascending sequence")
    if feedback is not None and feedback.dynamic:
        raise UnsupportedError("dynamic feedback needs conditioned quantities; use a strength schedule")

    shape = state.matrices.shape
    edges = [times[0], times[-1]]
    if feedback is not None:
        edges += [t for t in feedback.schedule.breakpoints() if times[0] < t < times[-1]]
    edges = np.unique(edges)

    def rhs(t, y, strength):
        current = state.replace(y.reshape(shape), t)
        rate = heom_drift(current, H_A, modes)
        if feedback is not None and strength != 0.0:
            fb_rate, _ = feedback_terms(current, strength * feedback.operator, modes[feedback.mode_index], feedback.mode_index)
            rate = rate + fb_rate
        return rate.ravel()

    physical = np.empty((len(times),) + shape[1:], dtype=complex)
    records = []
    y = state.matrices.ravel().copy()
    last = state
    if len(times) == 1:
        physical[0] = state.physical
        records.append(observe(state) if observe else {})
        return AverageSolution(times, physical, state, records)

    stored = np.zeros(len(times), dtype=bool)
    for a, b in zip(edges[:-1], edges[1:]):
        strength = feedback.schedule(a) if feedback is not None else 0.0
        inside = np.flatnonzero((times >= a) & (times <= b) & ~stored)
        t_eval = np.union1d(times[inside], [b])
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", t_eval=t_eval, rtol=rtol, atol=atol, args=(strength,))
        if not sol.success:
            raise IntegrationDivergedError(f"averaged hierarchy integration failed on [{a:.6g}, {b:.6g}]: {sol.message}")
        for col, t in enumerate(sol.t):
            snapshot = state.replace(sol.y[:, col].reshape(shape), float(t))
            snapshot.feedback_lambda = strength
            i = int(np.searchsorted(times, t))
            if i < len(times) and times[i] == t and not stored[i]:
                physical[i] = snapshot.physical
                records.append(observe(snapshot) if observe else {})
                stored[i] = True
            last = snapshot
        y = sol.y[:, -1]
        logger.debug("averaged segment [%.6g, %.6g] with lambda=%.6g: %d rhs evaluations", a, b, strength, sol.nfev)
    return AverageSolution(times, physical, last, records)
