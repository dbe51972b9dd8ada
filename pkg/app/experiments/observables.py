"""
Named observables recorded along runs. Each returns ``{column: value}`` with
columns named ``<observable>[.<component>]``.
"""
from typing import Callable

import numpy as np

from app.core.linalg import hermitian_eig, partial_trace
from app.core.operators import collective_spin, pauli
from app.heom.detection import photon_number, quadrature_expectation
from app.heom.feedback import jz_x_correlation
from app.heom.hierarchy import HierarchyState
from app.measures.information import mutual_information, negativity, purity, von_neumann_entropy
from app.measures.squeezing import spin_squeezing

Observer = Callable[..., dict]


def _trace(scenario, state):
    return {"trace": state.trace.real}


def _purity(scenario, state):
    return {"purity": purity(state.physical)}


def _clipped(rho):
    """Nearest state with the integrator-scale negative eigenvalues removed."""
    vals, vecs = hermitian_eig(rho)
    vals = np.clip(vals, 0.0, None)
    return (vecs * (vals / vals.sum())) @ vecs.conj().T


def _entropy(scenario, state):
    return {"entropy": von_neumann_entropy(_clipped(state.physical))}


def _bloch(scenario, state):
    rho = state.physical
    return {f"bloch.{axis}": float(np.trace(pauli(axis) @ rho).real) for axis in "xyz"}


def _excitation(scenario, state):
    """<sigma_+ sigma_-> + sum_k <a_k^dag a_k>; conserved by the undriven JC Hamiltonian."""
    rho = state.physical
    atom = float(rho[0, 0].real)
    photons = sum(photon_number(state, scenario.modes, k) for k in range(len(scenario.modes))) if state.k_max >= 2 else 0.0
    return {"excitation": atom + photons}


def _photon_number(scenario, state):
    return {f"photon_number.{k}": photon_number(state, scenario.modes, k, scenario.theta) for k in range(len(scenario.modes))}


def _quadrature(scenario, state):
    return {f"quadrature.{k}": quadrature_expectation(state, scenario.modes, k) for k in range(len(scenario.modes))}


def _spin(scenario, state):
    rho = state.physical
    n_atoms = state.dim - 1
    return {f"spin.{axis}": float(np.trace(collective_spin(n_atoms, axis) @ rho).real) for axis in "xyz"}


def _xi2(scenario, state):
    return {"xi2": spin_squeezing(state.physical, state.dim - 1).xi2}


def _jz_x(scenario, state):
    return {"jz_x": jz_x_correlation(state, scenario.modes[0].g)}


def _lambda(scenario, state):
    return {"lambda": state.feedback_lambda}


def _outer_clusters(scenario, state):
    layout = scenario.atom_layout
    first, last = layout.labels[0], layout.labels[-1]
    pair = layout.subset([first, last])
    return _clipped(partial_trace(state.physical, layout, [first, last])), pair, first, last


def _entropy_13(scenario, state):
    rho13, _, _, _ = _outer_clusters(scenario, state)
    return {"entropy_13": von_neumann_entropy(rho13)}


def _mutual_information_13(scenario, state):
    rho13, pair, first, last = _outer_clusters(scenario, state)
    return {"mutual_information_13": mutual_information(rho13, pair, first, last)}


def _negativity_13(scenario, state):
    rho13, pair, first, _ = _outer_clusters(scenario, state)
    return {"negativity_13": negativity(rho13, pair, first)}


OBSERVERS: dict[str, Observer] = {
    "trace": _trace,
    "purity": _purity,
    "entropy": _entropy,
    "bloch": _bloch,
    "excitation": _excitation,
    "photon_number": _photon_number,
    "quadrature": _quadrature,
    "spin": _spin,
    "xi2": _xi2,
    "jz_x": _jz_x,
    "lambda": _lambda,
    "entropy_13": _entropy_13,
    "mutual_information_13": _mutual_information_13,
    "negativity_13": _negativity_13,
}


def observe(scenario, state: HierarchyState, names=None) -> dict:
    values = {}
    for name in names if names is not None else scenario.config.outputs:
        values.update(OBSERVERS[name](scenario, state))
    return values
