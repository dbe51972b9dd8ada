"""
Second-order reductions of the hierarchy: the conditioned Redfield equation
and its bad-cavity (adiabatic) limit.
"""
import logging
from typing import Sequence

import numpy as np

from app.core.errors import IntegrationDivergedError, NotAStateError
from app.core.linalg import hermitian_eig
from app.core.operators import OperatorMatrix, dagger, identity, is_hermitian
from app.heom.hierarchy import DIVERGENCE_TRACE

logger = logging.getLogger(__name__)

CONVENTIONS = ("closure", "verbatim")
CONVENTION_MISMATCH_TOL = 1e-6


def _rk4(f, y0: np.ndarray, times: np.ndarray) -> np.ndarray:
    out = np.empty((len(times),) + y0.shape, dtype=complex)
    out[0] = y0
    y = y0
    for i in range(1, len(times)):
        t, h = times[i - 1], times[i] - times[i - 1]
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i] = y
    return out


def redfield_operator(
    H_A: OperatorMatrix,
    L: OperatorMatrix,
    g: float,
    delta: float,
    kappa: float,
    t_grid: Sequence[float],
    convention: str = "closure",
) -> np.ndarray:
    """
    Lbar(t) on ``t_grid``, shape (T, d, d), by RK4 on the grid.

    ``closure``:  dLbar/dt = g^2 L - i[H_A, Lbar] - (i Delta + kappa) Lbar,
                  the operator with rho^(1,0) = Lbar rho^(0,0) at first order.
    ``verbatim``: dLbar/dt = g^2 e^{-i H_A t} L e^{i H_A t} - (i Delta + kappa) Lbar.
    Both start from Lbar(0) = 0.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown Redfield convention '{convention}', expected one of {CONVENTIONS}")
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or len(times) == 0 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("t_grid must ascend from 0")
    w = complex(kappa, delta)
    L = np.asarray(L, dtype=complex)
    H = np.asarray(H_A, dtype=complex)

    if convention == "closure":
        def f(t, Lbar):
            return g ** 2 * L - 1j * (H @ Lbar - Lbar @ H) - w * Lbar
    else:
        energies, vectors = hermitian_eig(H)
        L_eigen = dagger(vectors) @ L @ vectors

        def f(t, Lbar):
            phase = np.exp(-1j * energies * t)
            rotated = vectors @ (phase[:, None] * L_eigen * np.conj(phase)[None, :]) @ dagger(vectors)
            return g ** 2 * rotated - w * Lbar

    return _rk4(f, np.zeros_like(L), times)


def compare_redfield_conventions(
    H_A: OperatorMatrix,
    L: OperatorMatrix,
    g: float,
    delta: float,
    kappa: float,
    t_grid: Sequence[float],
) -> float:
    """Max difference between the two conventions; logged when they disagree. The closure form is used."""
    closure = redfield_operator(H_A, L, g, delta, kappa, t_grid, "closure")
    verbatim = redfield_operator(H_A, L, g, delta, kappa, t_grid, "verbatim")
    gap = float(np.max(np.abs(closure - verbatim)))
    if gap > CONVENTION_MISMATCH_TOL:
        logger.warning("Redfield operator: verbatim form differs from the closure form by %.3g; using the closure form", gap)
    return gap


def _finish(rho: OperatorMatrix) -> OperatorMatrix:
    rho = 0.5 * (rho + dagger(rho))
    tr = float(np.trace(rho).real)
    if not np.isfinite(tr) or tr < DIVERGENCE_TRACE:
        raise IntegrationDivergedError(f"integration diverged: reduce dt (trace {tr:.3g})")
    return rho / tr


def conditioned_redfield_step(
    rho: OperatorMatrix,
    Lbar: OperatorMatrix,
    L: OperatorMatrix,
    H_A: OperatorMatrix,
    kappa: float,
    g: float,
    dt: float,
    dW: float,
) -> OperatorMatrix:
    """
    Euler-Maruyama step of

        d rho = (-i[H_A, rho] + [Lbar rho, L^dag] + [L, rho Lbar^dag]) dt
              + (i / g) sqrt(2 kappa) (rho (Lbar^dag - <Lbar^dag>) - (Lbar - <Lbar>) rho) dW
    """
    if not is_hermitian(rho, 1e-8):
        raise NotAStateError("conditioned Redfield step needs a Hermitian state")
    Ld = dagger(L)
    Lbar_d = dagger(Lbar)
    Lrho = Lbar @ rho
    rho_Ld = rho @ Lbar_d
    drift = -1j * (H_A @ rho - rho @ H_A) + (Lrho @ Ld - Ld @ Lrho) + (L @ rho_Ld - rho_Ld @ L)
    out = rho + drift * dt
    if g != 0.0:
        mean = complex(np.trace(Lrho))
        innovation = (rho_Ld - np.conj(mean) * rho) - (Lrho - mean * rho)
        out = out + (1j / g) * np.sqrt(2 * kappa) * innovation * dW
    return _finish(out)


def bad_cavity_step(
    rho: OperatorMatrix,
    g: float,
    kappa: float,
    L: OperatorMatrix,
    H_A: OperatorMatrix,
    dt: float,
    dW: float,
) -> OperatorMatrix:
    """
    Adiabatic limit Lbar = g^2 L / kappa, i.e. the homodyne SME

        d rho = D[c] rho dt + (c rho + rho c^dag - <c + c^dag> rho) dW,  c = -i g sqrt(2 / kappa) L,

    integrated with the measurement-operator map rho -> M rho M^dag / tr,
    M = 1 - (i H_A + c^dag c / 2) dt + c dy + c^2 (dy^2 - dt) / 2 and
    dy = <c + c^dag> dt + dW. The map keeps pure states pure.
    """
    if not is_hermitian(rho, 1e-8):
        raise NotAStateError("bad-cavity step needs a Hermitian state")
    d = rho.shape[0]
    c = -1j * g * np.sqrt(2 / kappa) * np.asarray(L, dtype=complex)
    cd = dagger(c)
    dy = float(np.trace((c + cd) @ rho).real) * dt + dW
    M = identity(d) - (1j * H_A + 0.5 * cd @ c) * dt + c * dy + 0.5 * (c @ c) * (dy ** 2 - dt)
    return _finish(M @ rho @ dagger(M))
