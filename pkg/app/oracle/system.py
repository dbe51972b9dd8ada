"""
Atom + truncated cavity modes as one closed description: the ground truth the
hierarchy is validated against.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from app.core.errors import CutoffLeakageError, DimensionError
from app.core.linalg import partial_trace
from app.core.operators import HilbertSpaceLayout, OperatorMatrix, annihilation_op, dagger, identity, projector
from app.heom.hierarchy import HierarchyState, HierarchyStructure
from app.heom.modes import Detection, ModeSpec

logger = logging.getLogger(__name__)

ATOM = "atom"
LEAKAGE_TOL = 1e-4


def mode_label(k: int) -> str:
    return f"mode{k}"


@dataclass(frozen=True)
class FullSystem:
    """
    H_AC = H_A + sum_k Delta_k a_k^dag a_k + g_k (L_k^dag a_k + L_k a_k^dag)
    with every mode decaying at rate 2 kappa_k.
    """

    layout: HilbertSpaceLayout
    hamiltonian: OperatorMatrix
    atom_ops: tuple
    a_ops: tuple
    modes: tuple

    @classmethod
    def from_modes(cls, H_A: OperatorMatrix, modes: Sequence[ModeSpec], n_max: Union[int, Sequence[int]]) -> "FullSystem":
        """
        Args:
            H_A: atom Hamiltonian
            modes: cavity modes
            n_max: Fock cutoff (highest retained photon number), one value or one per mode
        """
        H_A = np.asarray(H_A, dtype=complex)
        cutoffs = [int(n_max)] * len(modes) if np.isscalar(n_max) else [int(n) for n in n_max]
        if len(cutoffs) != len(modes):
            raise DimensionError(f"{len(cutoffs)} Fock cutoffs for {len(modes)} modes")
        layout = HilbertSpaceLayout.of((ATOM, H_A.shape[0]), *[(mode_label(k), n + 1) for k, n in enumerate(cutoffs)])

        a_ops = tuple(layout.embed(annihilation_op(n + 1), mode_label(k)) for k, n in enumerate(cutoffs))
        H = layout.embed(H_A, ATOM)
        atom_ops = []
        for k, mode in enumerate(modes):
            L = layout.embed(mode.coupling_op, ATOM)
            a = a_ops[k]
            H = H + mode.delta * dagger(a) @ a + mode.g * (dagger(L) @ a + L @ dagger(a))
            atom_ops.append(L)
        return cls(layout, H, tuple(atom_ops), a_ops, tuple(modes))

    @property
    def dim(self) -> int:
        return self.layout.dim

    @property
    def atom_dim(self) -> int:
        return self.layout.dims[0]

    @property
    def fock_dims(self) -> tuple[int, ...]:
        return self.layout.dims[1:]

    def embed_atom(self, op: OperatorMatrix) -> OperatorMatrix:
        return self.layout.embed(np.asarray(op, dtype=complex), ATOM)

    def product_state(self, atom_state: np.ndarray) -> "FullState":
        """Atom state (vector or density matrix) times the vacuum of every mode."""
        atom_state = np.asarray(atom_state, dtype=complex)
        vacuum = np.zeros(int(np.prod(self.fock_dims)), dtype=complex)
        vacuum[0] = 1.0
        if atom_state.ndim == 1:
            return FullState(np.kron(atom_state, vacuum))
        return FullState(np.kron(atom_state, projector(vacuum)))

    def modes_with(self, detection: Detection) -> list[int]:
        return [k for k, mode in enumerate(self.modes) if mode.detection == detection]


@dataclass
class FullState:
    """State vector (pure, SSE) or density matrix (SME) on the full layout."""

    data: np.ndarray
    time: float = 0.0

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def density_matrix(self) -> OperatorMatrix:
        return projector(self.data) if self.is_pure else self.data

    def expect(self, op: OperatorMatrix) -> complex:
        if self.is_pure:
            return complex(np.vdot(self.data, op @ self.data))
        return complex(np.trace(op @ self.data))


def reduced_state(state: FullState, system: FullSystem) -> OperatorMatrix:
    """rho_A = tr_C rho_AC."""
    return partial_trace(state.density_matrix(), system.layout, [ATOM])


def top_level_populations(state: FullState, system: FullSystem) -> list[float]:
    pops = []
    for k, dim in enumerate(system.fock_dims):
        top = np.zeros((dim, dim), dtype=complex)
        top[-1, -1] = 1.0
        pops.append(state.expect(system.layout.embed(top, mode_label(k))).real)
    return pops


def check_leakage(state: FullState, system: FullSystem, tol: float = LEAKAGE_TOL, strict: bool = True) -> bool:
    """False (or CutoffLeakageError when strict) once a mode populates its top Fock level beyond tol."""
    for k, pop in enumerate(top_level_populations(state, system)):
        if pop > tol:
            message = f"cutoff too small: mode {k} top Fock level holds {pop:.3g} at t={state.time:.6g}"
            if strict:
                raise CutoffLeakageError(message)
            logger.warning(message)
            return False
    return True


def hierarchy_from_full_state(
    state: Union[FullState, OperatorMatrix],
    system: FullSystem,
    k_max: int,
    structure: Optional[HierarchyStructure] = None,
) -> HierarchyState:
    """
    Exact auxiliaries of a full state:
    rho^(n,m) = prod_k (i g_k)^n_k (-i g_k)^m_k tr_C(a^n rho_AC (a^dag)^m).
    """
    full = state if isinstance(state, FullState) else FullState(np.asarray(state, dtype=complex))
    rho = full.density_matrix()
    if structure is None:
        structure = HierarchyStructure(len(system.modes), k_max)
    d = system.atom_dim
    matrices = np.zeros((structure.size, d, d), dtype=complex)
    identity_full = identity(system.dim)
    for i, idx in enumerate(structure.indices):
        left = identity_full
        right = identity_full
        scale = 1.0 + 0j
        for k, mode in enumerate(system.modes):
            a = system.a_ops[k]
            left = left @ np.linalg.matrix_power(a, idx.n[k])
            right = right @ np.linalg.matrix_power(dagger(a), idx.m[k])
            scale *= (1j * mode.g) ** idx.n[k] * (-1j * mode.g) ** idx.m[k]
        matrices[i] = scale * partial_trace(left @ rho @ right, system.layout, [ATOM])
    return HierarchyState(structure, matrices, full.time)
