"""
Full-system stochastic master equations (density matrices) and the
unconditioned Lindblad equation.
"""
import logging
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from app.core.errors import IntegrationDivergedError, NotAStateError
from app.core.operators import OperatorMatrix, dagger
from app.heom.hierarchy import DIVERGENCE_TRACE
from app.heom.modes import Detection, FeedbackSpec
from app.noise.streams import JumpClock
from app.oracle.sse import jump, photon_number
from app.oracle.system import FullState, FullSystem, check_leakage, reduced_state

logger = logging.getLogger(__name__)


def lindblad_rhs(rho: OperatorMatrix, system: FullSystem) -> OperatorMatrix:
    """-i[H_AC, rho] + sum_k kappa_k (2 a rho a^dag - a^dag a rho - rho a^dag a)."""
    H = system.hamiltonian
    out = -1j * (H @ rho - rho @ H)
    for k, mode in enumerate(system.modes):
        a = system.a_ops[k]
        ad = dagger(a)
        nk = ad @ a
        out += mode.kappa * (2 * a @ rho @ ad - nk @ rho - rho @ nk)
    return out


def feedback_rhs(rho: OperatorMatrix, system: FullSystem, fb: FeedbackSpec, strength: float) -> tuple[OperatorMatrix, OperatorMatrix]:
    """
    (rate, dW coefficient) of current feedback with F = strength * fb.operator:
    D[F] rho - i sqrt(2 kappa)[F, a rho + rho a^dag] and -i[F, rho].
    """
    F = system.embed_atom(strength * fb.operator)
    a = system.a_ops[fb.mode_index]
    s = system.modes[fb.mode_index].sqrt_2kappa
    F2 = F @ F
    inner = a @ rho + rho @ dagger(a)
    rate = F @ rho @ F - 0.5 * (F2 @ rho + rho @ F2) - 1j * s * (F @ inner - inner @ F)
    return rate, -1j * (F @ rho - rho @ F)


def _finish(rho: OperatorMatrix, time: float) -> FullState:
    rho = 0.5 * (rho + dagger(rho))
    tr = float(np.trace(rho).real)
    if not np.isfinite(tr) or tr < DIVERGENCE_TRACE:
        raise IntegrationDivergedError(f"integration diverged: reduce dt (trace {tr:.3g} at t={time:.6g})")
    return FullState(rho / tr, time)


def sme_step(
    state: FullState,
    system: FullSystem,
    dt: float,
    increments: Sequence,
    feedback: Optional[FeedbackSpec] = None,
    strength: float = 0.0,
    check_cutoff: bool = True,
) -> FullState:
    """
    One Euler-Maruyama step of

        d rho = L rho dt
              + sum_hom sqrt(2k)(a rho + rho a^dag - <X> rho) dW
              + sum_het sqrt(2k)((a - <a>) rho dW_c + rho (a^dag - <a^dag>) dW_c*)
              + sum_pd (2k <a^dag a> rho - 2k a rho a^dag) dt
              + feedback terms
    """
    if state.is_pure:
        raise NotAStateError("SME step needs a density matrix")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    rho = state.data
    delta = lindblad_rhs(rho, system) * dt
    for k, mode in enumerate(system.modes):
        a = system.a_ops[k]
        ad = dagger(a)
        s = mode.sqrt_2kappa
        if mode.detection == Detection.HOMODYNE:
            x = float(np.trace((a + ad) @ rho).real)
            delta += s * (a @ rho + rho @ ad - x * rho) * increments[k]
        elif mode.detection == Detection.HETERODYNE:
            mean_a = complex(np.trace(a @ rho))
            dw = complex(increments[k])
            delta += s * ((a @ rho - mean_a * rho) * dw + (rho @ ad - np.conj(mean_a) * rho) * np.conj(dw))
        elif mode.detection == Detection.PHOTODETECT:
            n = float(np.trace(ad @ a @ rho).real)
            delta += 2 * mode.kappa * (n * rho - a @ rho @ ad) * dt
    if feedback is not None:
        rate, noise = feedback_rhs(rho, system, feedback, strength)
        delta += rate * dt + noise * float(increments[feedback.mode_index])
    new = _finish(rho + delta, state.time + dt)
    if check_cutoff:
        check_leakage(new, system)
    return new


def sme_homodyne_step(state: FullState, system: FullSystem, dt: float, dW: Sequence[float], **kwargs) -> FullState:
    return sme_step(state, system, dt, dW, **kwargs)


def sme_heterodyne_step(state: FullState, system: FullSystem, dt: float, dW_c: Sequence[complex], **kwargs) -> FullState:
    return sme_step(state, system, dt, dW_c, **kwargs)


def sme_jump_step(
    state: FullState,
    system: FullSystem,
    dt: float,
    clocks: dict[int, JumpClock],
    increments: Optional[Sequence] = None,
    check_cutoff: bool = True,
) -> tuple[FullState, list[bool]]:
    if increments is None:
        increments = [0.0] * len(system.modes)
    fired = [False] * len(system.modes)
    for k, clock in clocks.items():
        fired[k] = clock.advance(2 * system.modes[k].kappa * photon_number(state, system, k), dt)
    new = sme_step(state, system, dt, increments, check_cutoff=check_cutoff)
    for k, hit in enumerate(fired):
        if hit:
            new = jump(new, system, k)
    return new, fired


def integrate_lindblad(
    state: FullState,
    system: FullSystem,
    t_grid: Sequence[float],
    feedback: Optional[FeedbackSpec] = None,
    strength: float = 0.0,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> np.ndarray:
    """Reduced atom states of the unconditioned evolution on ``t_grid``, shape (T, d, d)."""
    times = np.asarray(t_grid, dtype=float)
    rho0 = state.density_matrix()
    shape = rho0.shape

    def rhs(t, y):
        rho = y.reshape(shape)
        rate = lindblad_rhs(rho, system)
        if feedback is not None and strength != 0.0:
            rate = rate + feedback_rhs(rho, system, feedback, strength)[0]
        return rate.ravel()

    sol = solve_ivp(rhs, (times[0], times[-1]), rho0.ravel(), method="DOP853", t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationDivergedError(f"Lindblad integration failed: {sol.message}")
    return np.stack([
        reduced_state(FullState(sol.y[:, i].reshape(shape), float(t)), system) for i, t in enumerate(sol.t)
    ])
