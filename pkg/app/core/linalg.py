"""
Partial trace / transpose and Hermitian spectral routines on declared layouts.
"""
from typing import Iterable

import numpy as np
from scipy import linalg

from app.core.errors import DimensionError, NotAStateError
from app.core.operators import HilbertSpaceLayout, OperatorMatrix, dagger

EIGVALS_HERMITIAN_TOL = 1e-10


def partial_trace(rho: OperatorMatrix, layout: HilbertSpaceLayout, keep: Iterable[str]) -> OperatorMatrix:
    """Trace out every factor not listed in ``keep``; kept factors stay in layout order."""
    keep = set(keep)
    if not keep:
        raise DimensionError("partial_trace needs at least one factor to keep")
    positions = sorted(layout.position(label) for label in keep)
    layout.check(rho)

    dims = list(layout.dims)
    n = len(dims)
    tensor = rho.reshape(dims + dims)
    # trace highest axes first so lower axis numbers stay valid
    for ax in sorted(set(range(len(dims))) - set(positions), reverse=True):
        tensor = np.trace(tensor, axis1=ax, axis2=ax + n)
        n -= 1
    kept_dim = int(np.prod([dims[p] for p in positions], dtype=np.int64))
    return tensor.reshape(kept_dim, kept_dim)


def partial_transpose(rho: OperatorMatrix, layout: HilbertSpaceLayout, part: str) -> OperatorMatrix:
    """Transpose the indices of one tensor factor."""
    pos = layout.position(part)
    layout.check(rho)
    dims = list(layout.dims)
    n = len(dims)
    tensor = rho.reshape(dims + dims)
    tensor = np.swapaxes(tensor, pos, pos + n)
    return tensor.reshape(layout.dim, layout.dim)


def hermitian_eigvals(m: OperatorMatrix) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian matrix."""
    scale = max(float(np.max(np.abs(m), initial=0.0)), 1.0)
    if np.max(np.abs(m - dagger(m)), initial=0.0) > EIGVALS_HERMITIAN_TOL * scale:
        raise NotAStateError("hermitian_eigvals called on a non-Hermitian matrix")
    return linalg.eigvalsh((m + dagger(m)) / 2)


def hermitian_eig(m: OperatorMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a Hermitian matrix (columns of the second array)."""
    hermitian_eigvals(m)
    return linalg.eigh((m + dagger(m)) / 2)


def trace_norm(op: OperatorMatrix) -> float:
    """Sum of singular values, tr sqrt(O^dag O)."""
    return float(np.sum(linalg.svdvals(op)))
