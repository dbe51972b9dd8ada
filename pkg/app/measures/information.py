"""
Entropy and correlation diagnostics evaluated on a single conditioned state.
"""
import numpy as np

from app.core.errors import DimensionError, NotAStateError
from app.core.linalg import hermitian_eigvals, partial_trace, partial_transpose
from app.core.operators import HilbertSpaceLayout, OperatorMatrix

STATE_TRACE_TOL = 1e-8
NEGATIVE_EIGVAL_TOL = 1e-10
ZERO_EIGVAL_CLIP = 1e-14
NEGATIVITY_FLOOR = -1e-10


def von_neumann_entropy(rho: OperatorMatrix) -> float:
    """S = -tr rho ln rho in nats, with 0 ln 0 = 0."""
    if abs(np.trace(rho) - 1) > STATE_TRACE_TOL:
        raise NotAStateError(f"not a state: trace {complex(np.trace(rho)):.3g}")
    eigvals = hermitian_eigvals(rho)
    if eigvals[0] < -NEGATIVE_EIGVAL_TOL:
        raise NotAStateError(f"not a state: eigenvalue {eigvals[0]:.3g}")
    p = eigvals[eigvals > ZERO_EIGVAL_CLIP]
    return float(max(-np.sum(p * np.log(p)), 0.0))


def purity(rho: OperatorMatrix) -> float:
    return float(np.real(np.trace(rho @ rho)))


def trace_distance(rho: OperatorMatrix, sigma: OperatorMatrix) -> float:
    """||rho - sigma||_1 (no factor one half)."""
    if rho.shape != sigma.shape:
        raise DimensionError(f"trace_distance of shapes {rho.shape} and {sigma.shape}")
    return float(np.sum(np.abs(hermitian_eigvals(rho - sigma))))


def mutual_information(rho: OperatorMatrix, layout: HilbertSpaceLayout, part_a: str, part_b: str) -> float:
    """I = S[rho_a] + S[rho_b] - S[rho_ab] for a state on exactly the two factors."""
    if set(layout.labels) != {part_a, part_b} or part_a == part_b:
        raise DimensionError(f"mutual_information needs a state on exactly {{{part_a}, {part_b}}}, got {list(layout.labels)}")
    rho_a = partial_trace(rho, layout, {part_a})
    rho_b = partial_trace(rho, layout, {part_b})
    return von_neumann_entropy(rho_a) + von_neumann_entropy(rho_b) - von_neumann_entropy(rho)


def negativity(rho: OperatorMatrix, layout: HilbertSpaceLayout, part: str) -> float:
    """(||rho^T_part||_1 - 1) / 2, floor-clipped against integrator noise."""
    if len(layout.factors) != 2:
        raise DimensionError(f"negativity expects a two-factor layout, got {list(layout.labels)}")
    rho_pt = partial_transpose(rho, layout, part)
    value = (np.sum(np.abs(hermitian_eigvals(rho_pt))) - 1) / 2
    if NEGATIVITY_FLOOR <= value < 0:
        return 0.0
    return float(value)


def information_gain(mean_of_entropies: float, entropy_of_mean: float) -> float:
    """Entropy of the average state minus the average conditioned entropy."""
    return float(entropy_of_mean - mean_of_entropies)
