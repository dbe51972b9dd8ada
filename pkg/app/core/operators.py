"""
Dense operator construction on composite Hilbert spaces.

Operators are plain ``numpy`` complex arrays; dimension metadata lives in the
``HilbertSpaceLayout`` an operator is declared on.
"""
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from app.core.errors import DimensionError

OperatorMatrix = NDArray[np.complex128]

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class HilbertSpaceLayout:
    """Ordered tensor factors, e.g. (("atom", 2), ("mode0", 4))."""

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        labels = [label for label, _ in self.factors]
        if len(set(labels)) != len(labels):
            raise DimensionError(f"Duplicate factor labels in layout: {labels}")
        for label, dim in self.factors:
            if dim < 1:
                raise DimensionError(f"Factor '{label}' has non-positive dimension {dim}")

    @classmethod
    def of(cls, *factors: tuple[str, int]) -> "HilbertSpaceLayout":
        return cls(tuple((str(label), int(dim)) for label, dim in factors))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def position(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DimensionError(f"Unknown factor label '{label}' (layout has {list(self.labels)})") from None

    def subset(self, keep: Iterable[str]) -> "HilbertSpaceLayout":
        keep = set(keep)
        for label in keep:
            self.position(label)
        return HilbertSpaceLayout(tuple(f for f in self.factors if f[0] in keep))

    def check(self, op: OperatorMatrix) -> None:
        if op.shape != (self.dim, self.dim):
            raise DimensionError(f"Operator of shape {op.shape} does not live on layout {self.factors}")

    def embed(self, op: OperatorMatrix, label: str) -> OperatorMatrix:
        """Lift a single-factor operator to the full space (identity elsewhere)."""
        pos = self.position(label)
        if op.shape != (self.dims[pos], self.dims[pos]):
            raise DimensionError(f"Operator of shape {op.shape} does not fit factor '{label}' of dim {self.dims[pos]}")
        parts = [identity(d) for d in self.dims]
        parts[pos] = np.asarray(op, dtype=complex)
        return kron_compose(parts)


def identity(dim: int) -> OperatorMatrix:
    return np.eye(dim, dtype=complex)


def dagger(op: OperatorMatrix) -> OperatorMatrix:
    return op.conj().T


def is_hermitian(op: OperatorMatrix, tol: float = HERMITIAN_TOL) -> bool:
    scale = max(float(np.max(np.abs(op))), 1.0) if op.size else 1.0
    return bool(np.max(np.abs(op - dagger(op)), initial=0.0) <= tol * scale)


def kron_compose(ops: Sequence[OperatorMatrix]) -> OperatorMatrix:
    """Kronecker product of square operators in the given order."""
    if len(ops) == 0:
        raise DimensionError("no operands")
    for op in ops:
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise DimensionError(f"Operand of shape {op.shape} is not square")
    return reduce(np.kron, [np.asarray(op, dtype=complex) for op in ops])


def annihilation_op(fock_dim: int) -> OperatorMatrix:
    """Truncated bosonic lowering operator, a[n-1, n] = sqrt(n)."""
    if fock_dim < 2:
        raise DimensionError(f"fock_dim must be >= 2, got {fock_dim}")
    return np.diag(np.sqrt(np.arange(1, fock_dim)), k=1).astype(complex)


def collective_spin(n_atoms: int, axis: str) -> OperatorMatrix:
    """
    Collective spin component on the symmetric sector j = n_atoms / 2.

    Basis ordered by descending magnetic number m = j, j-1, ..., -j, so that
    n_atoms = 1 gives the Pauli matrices divided by two.
    """
    if n_atoms < 1:
        raise DimensionError(f"n_atoms must be >= 1, got {n_atoms}")
    j = n_atoms / 2
    m = j - np.arange(n_atoms + 1)
    if axis == "z":
        return np.diag(m).astype(complex)
    # <m+1|J_+|m> sits one row above the diagonal in descending-m order
    raising = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    lowering = dagger(raising)
    if axis == "x":
        return (raising + lowering) / 2
    if axis == "y":
        return (raising - lowering) / 2j
    if axis == "+":
        return raising
    if axis == "-":
        return lowering
    raise ValueError(f"Unknown spin axis '{axis}'")


def pauli(axis: str) -> OperatorMatrix:
    return 2 * collective_spin(1, axis)


def sigma_minus() -> OperatorMatrix:
    """|0><1| with the excited state |1> stored first (sigma_z = diag(1, -1))."""
    return collective_spin(1, "-")


def ket(dim: int, index: int) -> NDArray[np.complex128]:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vector: NDArray[np.complex128]) -> OperatorMatrix:
    v = np.asarray(vector, dtype=complex)
    return np.outer(v, v.conj())


def coherent_spin_state_x(n_atoms: int) -> NDArray[np.complex128]:
    """All spins along +x: exp(-i pi/2 J_y) applied to |j, m=j>."""
    top = ket(n_atoms + 1, 0)
    return expm(-1j * (np.pi / 2) * collective_spin(n_atoms, "y")) @ top


def expect(op: OperatorMatrix, rho: OperatorMatrix) -> complex:
    return complex(np.trace(op @ rho))
