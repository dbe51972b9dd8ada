"""
Hierarchy storage: the ordered auxiliary matrices and their neighbor tables.

Matrices live in one (K, d, d) array in ``enumerate_indices`` order. Neighbor
lookups go through integer tables into a padded (K + 1, d, d) copy whose last
slot is zero, so indices outside the truncation (or with a negative entry)
read as zero matrices. Every table maps the padding slot K onto itself, which
lets tables be composed, e.g. ``up_n[k][up_n[k]]`` for a two-level shift.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from app.core.errors import DimensionError, IntegrationDivergedError, TruncationError
from app.core.operators import OperatorMatrix
from app.heom.indices import MultiIndex, enumerate_indices

logger = logging.getLogger(__name__)

DIVERGENCE_TRACE = 0.5


@dataclass(frozen=True)
class HierarchyStructure:
    modes: int
    k_max: int
    indices: tuple[MultiIndex, ...] = field(init=False, compare=False, repr=False)
    position: dict = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        indices, _ = enumerate_indices(self.modes, self.k_max)
        object.__setattr__(self, "indices", tuple(indices))
        object.__setattr__(self, "position", {idx: i for i, idx in enumerate(indices)})

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def pad(self) -> int:
        return self.size

    def index_of(self, index: MultiIndex) -> int:
        index = MultiIndex(tuple(index[0]), tuple(index[1]))
        try:
            return self.position[index]
        except KeyError:
            raise TruncationError(f"index {index} is not retained at k_max={self.k_max}") from None

    def _lookup(self, index: MultiIndex) -> int:
        if min(index.n + index.m) < 0:
            return self.pad
        return self.position.get(index, self.pad)

    def _shift_table(self, dn: int, dm: int) -> np.ndarray:
        table = np.full((self.modes, self.size + 1), self.pad, dtype=np.intp)
        for k in range(self.modes):
            for i, idx in enumerate(self.indices):
                table[k, i] = self._lookup(idx.shifted(k, dn, dm))
        return table

    @cached_property
    def up_n(self) -> np.ndarray:
        """up_n[k, i]: position of (n + e_k, m)."""
        return self._shift_table(1, 0)

    @cached_property
    def up_m(self) -> np.ndarray:
        return self._shift_table(0, 1)

    @cached_property
    def down_n(self) -> np.ndarray:
        return self._shift_table(-1, 0)

    @cached_property
    def down_m(self) -> np.ndarray:
        return self._shift_table(0, -1)

    @cached_property
    def up_nm(self) -> np.ndarray:
        """up_nm[k, i]: position of (n + e_k, m + e_k)."""
        return self._shift_table(1, 1)

    @cached_property
    def pair(self) -> np.ndarray:
        """pair[i]: position of the swapped index (m, n)."""
        return np.array([self.position[idx.swapped()] for idx in self.indices], dtype=np.intp)

    @cached_property
    def n_counts(self) -> np.ndarray:
        return np.array([idx.n for idx in self.indices], dtype=float).reshape(self.size, self.modes)

    @cached_property
    def m_counts(self) -> np.ndarray:
        return np.array([idx.m for idx in self.indices], dtype=float).reshape(self.size, self.modes)

    def first_level(self, mode: int) -> tuple[int, int]:
        """Positions of (e_k, 0) and (0, e_k)."""
        if self.k_max < 1:
            raise TruncationError("first-level auxiliaries required")
        return int(self.up_n[mode, 0]), int(self.up_m[mode, 0])


@dataclass
class HierarchyState:
    """
    Conditioned auxiliary matrices at one time.

    ``matrices[0]`` is the physical atom state rho^(0,0). The state is owned by
    a single trajectory and the steppers return fresh instances.
    """

    structure: HierarchyStructure
    matrices: np.ndarray
    time: float = 0.0
    feedback_lambda: float = 0.0

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=complex)
        if self.matrices.ndim != 3 or self.matrices.shape[0] != self.structure.size:
            raise DimensionError(
                f"expected ({self.structure.size}, d, d) auxiliary matrices, got shape {self.matrices.shape}"
            )
        if self.matrices.shape[1] != self.matrices.shape[2]:
            raise DimensionError("auxiliary matrices must be square")

    @classmethod
    def vacuum(cls, structure: HierarchyStructure, rho0: OperatorMatrix, time: float = 0.0) -> "HierarchyState":
        """Atom state rho0 with every cavity mode in the vacuum: all auxiliaries zero."""
        rho0 = np.asarray(rho0, dtype=complex)
        matrices = np.zeros((structure.size,) + rho0.shape, dtype=complex)
        matrices[0] = rho0
        return cls(structure, matrices, time)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def modes(self) -> int:
        return self.structure.modes

    @property
    def k_max(self) -> int:
        return self.structure.k_max

    @property
    def indices(self) -> tuple[MultiIndex, ...]:
        return self.structure.indices

    @property
    def physical(self) -> OperatorMatrix:
        return self.matrices[0]

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrices[0]))

    def matrix(self, index: MultiIndex) -> OperatorMatrix:
        return self.matrices[self.structure.index_of(index)]

    def padded(self) -> np.ndarray:
        out = np.zeros((self.structure.size + 1, self.dim, self.dim), dtype=complex)
        out[:-1] = self.matrices
        return out

    def replace(self, matrices: np.ndarray, time: Optional[float] = None) -> "HierarchyState":
        return HierarchyState(
            self.structure,
            matrices,
            self.time if time is None else time,
            self.feedback_lambda,
        )

    def renormalized(self) -> "HierarchyState":
        """Rescale the whole hierarchy by 1 / tr rho^(0,0)."""
        tr = self.trace.real
        if not np.isfinite(tr) or tr < DIVERGENCE_TRACE:
            raise IntegrationDivergedError(f"integration diverged: reduce dt (trace {tr:.3g} at t={self.time:.6g})")
        return self.replace(self.matrices / tr)

    def paired(self) -> "HierarchyState":
        """Symmetrize so that rho^(m,n) = (rho^(n,m))^dag exactly."""
        mats = self.matrices
        sym = 0.5 * (mats + np.conj(np.swapaxes(mats[self.structure.pair], 1, 2)))
        return self.replace(sym)

    def pairing_error(self) -> float:
        mats = self.matrices
        diff = mats - np.conj(np.swapaxes(mats[self.structure.pair], 1, 2))
        return float(np.max(np.abs(diff), initial=0.0))

    def copy(self) -> "HierarchyState":
        return self.replace(self.matrices.copy())


def adjoint_stack(stack: np.ndarray) -> np.ndarray:
    """Elementwise dagger of a (K, d, d) stack."""
    return np.conj(np.swapaxes(stack, -1, -2))
