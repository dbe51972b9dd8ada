import numpy as np
import pytest
from scipy.linalg import expm

from app.core.errors import DimensionError, FeedbackSingularError, JumpFromEmptyModeError, TruncationError, UnsupportedError
from app.core.linalg import trace_norm
from app.core.operators import collective_spin, coherent_spin_state_x, ket, pauli, projector, sigma_minus
from app.heom.baselines import bad_cavity_step, compare_redfield_conventions, conditioned_redfield_step, redfield_operator
from app.heom.detection import apply_jump, homodyne_current, photon_number, quadrature_expectation
from app.heom.drift import heom_drift
from app.heom.feedback import dynamic_lambda, resolve_strength
from app.heom.hierarchy import HierarchyState, HierarchyStructure
from app.heom.integrators import integrate_average, step_ito, step_stratonovich
from app.heom.modes import Detection, FeedbackSpec, ModeSpec, StrengthSchedule
from app.measures.information import purity
from tests.helpers import random_density_matrix


def random_hierarchy(structure, dim, rng):
    matrices = rng.standard_normal((structure.size, dim, dim)) + 1j * rng.standard_normal((structure.size, dim, dim))
    return HierarchyState(structure, matrices)


def spin_mode(n_atoms, g=1.0, kappa=1.0):
    return ModeSpec(g, 0.0, kappa, 1j * collective_spin(n_atoms, "z"), Detection.HOMODYNE)


def test_drift_is_linear(rng, jc_operators, jc_mode):
    H, _, _ = jc_operators
    structure = HierarchyStructure(1, 4)
    a, b = random_hierarchy(structure, 2, rng), random_hierarchy(structure, 2, rng)
    combined = HierarchyState(structure, 2.0 * a.matrices - 0.5j * b.matrices)
    expected = 2.0 * heom_drift(a, H, [jc_mode]) - 0.5j * heom_drift(b, H, [jc_mode])
    assert np.allclose(heom_drift(combined, H, [jc_mode]), expected, atol=1e-12)


def test_decoupled_atom_evolves_unitarily():
    H = 0.5 * pauli("z") + 0.3 * pauli("x")
    modes = [ModeSpec(0.0, 1.0, 2.0, sigma_minus(), Detection.HOMODYNE)]
    rho0 = projector(ket(2, 0))
    times = np.linspace(0.0, 2.0, 11)
    solution = integrate_average(HierarchyState.vacuum(HierarchyStructure(1, 3), rho0), H, modes, times)
    for t, rho in zip(times, solution.physical):
        U = expm(-1j * H * t)
        assert np.allclose(rho, U @ rho0 @ U.conj().T, atol=1e-8)
    assert np.max(np.abs(solution.final.matrices[1:])) < 1e-12


def test_drift_rejects_mismatched_operators(jc_mode):
    state = HierarchyState.vacuum(HierarchyStructure(1, 2), projector(ket(3, 0)))
    with pytest.raises(DimensionError):
        heom_drift(state, np.eye(3), [jc_mode])
    with pytest.raises(DimensionError):
        heom_drift(state, np.eye(3), [jc_mode, jc_mode])


def test_step_rejects_bad_increments(jc_operators, jc_mode):
    H, _, rho0 = jc_operators
    state = HierarchyState.vacuum(HierarchyStructure(1, 2), rho0)
    with pytest.raises(ValueError):
        step_ito(state, H, [jc_mode], 0.0, [0.0])
    with pytest.raises(ValueError):
        step_ito(state, H, [jc_mode], 1e-3, [0.0, 0.0])


def test_steps_keep_trace_and_pairing(rng, jc_operators, jc_mode):
    H, _, rho0 = jc_operators
    state = HierarchyState.vacuum(HierarchyStructure(1, 4), rho0)
    for dW in 0.03 * rng.standard_normal(200):
        state = step_ito(state, H, [jc_mode], 1e-3, [dW])
    assert state.trace == pytest.approx(1.0, abs=1e-12)
    assert state.pairing_error() < 1e-12
    assert state.time == pytest.approx(0.2)
    x = quadrature_expectation(state, [jc_mode], 0)
    assert homodyne_current(state, [jc_mode], 0, 2e-3, 1e-3) == pytest.approx(np.sqrt(6.0) * x + 2.0)


def test_photon_number_needs_second_level(jc_operators, jc_mode):
    _, _, rho0 = jc_operators
    state = HierarchyState.vacuum(HierarchyStructure(1, 1), rho0)
    with pytest.raises(TruncationError):
        photon_number(state, [jc_mode], 0)


def test_jump_from_vacuum_is_rejected(jc_operators):
    _, _, rho0 = jc_operators
    mode = ModeSpec(2.0, 1.0, 3.0, sigma_minus(), Detection.PHOTODETECT)
    with pytest.raises(JumpFromEmptyModeError):
        apply_jump(HierarchyState.vacuum(HierarchyStructure(1, 2), rho0), [mode], 0)


def test_schedule_is_piecewise_constant():
    schedule = StrengthSchedule((0.0, 1.0, 2.5), (0.2, -0.1, 0.2))
    assert schedule(0.0) == 0.2
    assert schedule(0.999) == 0.2
    assert schedule(1.0) == -0.1
    assert schedule(3.0) == 0.2
    assert schedule.breakpoints() == [1.0, 2.5]
    with pytest.raises(ValueError):
        StrengthSchedule((1.0, 0.0), (0.1, 0.2))


def test_feedback_spec_validation():
    jy = collective_spin(2, "y")
    with pytest.raises(ValueError):
        FeedbackSpec(0, jy)
    with pytest.raises(ValueError):
        FeedbackSpec(0, jy, StrengthSchedule.constant(0.1), dynamic=True)
    with pytest.raises(ValueError):
        FeedbackSpec(0, collective_spin(2, "+"), StrengthSchedule.constant(0.1))
    with pytest.raises(UnsupportedError):
        FeedbackSpec(0, jy, StrengthSchedule.constant(0.1)).validate_modes([ModeSpec(1.0, 0.0, 1.0, jy, Detection.HETERODYNE)])


def test_dynamic_strength_singular_state():
    n_atoms = 2
    mode = spin_mode(n_atoms)
    state = HierarchyState.vacuum(HierarchyStructure(1, 2), projector(ket(3, 0)))
    state.feedback_lambda = 0.37
    with pytest.raises(FeedbackSingularError):
        dynamic_lambda(state, mode.kappa, mode.g)

    held = FeedbackSpec(0, collective_spin(n_atoms, "y"), dynamic=True)
    assert resolve_strength(state, held, [mode]) == 0.37
    strict = FeedbackSpec(0, collective_spin(n_atoms, "y"), dynamic=True, hold_on_singular=False)
    with pytest.raises(FeedbackSingularError):
        resolve_strength(state, strict, [mode])


def test_dynamic_strength_vanishes_without_correlation():
    n_atoms = 4
    mode = spin_mode(n_atoms)
    state = HierarchyState.vacuum(HierarchyStructure(1, 2), projector(coherent_spin_state_x(n_atoms)))
    assert dynamic_lambda(state, mode.kappa, mode.g) == pytest.approx(0.0, abs=1e-14)


def test_averaged_integration_rejects_dynamic_feedback():
    n_atoms = 2
    mode = spin_mode(n_atoms)
    state = HierarchyState.vacuum(HierarchyStructure(1, 2), projector(coherent_spin_state_x(n_atoms)))
    feedback = FeedbackSpec(0, collective_spin(n_atoms, "y"), dynamic=True)
    with pytest.raises(UnsupportedError):
        integrate_average(state, np.zeros((3, 3)), [mode], [0.0, 1.0], feedback=feedback)


def test_zero_feedback_schedule_changes_nothing():
    n_atoms = 2
    mode = spin_mode(n_atoms)
    H = np.zeros((3, 3), dtype=complex)
    state = HierarchyState.vacuum(HierarchyStructure(1, 4), projector(coherent_spin_state_x(n_atoms)))
    times = np.linspace(0.0, 1.0, 6)
    feedback = FeedbackSpec(0, collective_spin(n_atoms, "y"), StrengthSchedule((0.0, 0.5), (0.0, 0.0)))
    plain = integrate_average(state, H, [mode], times)
    with_feedback = integrate_average(state, H, [mode], times, feedback=feedback)
    assert np.allclose(plain.physical, with_feedback.physical, atol=1e-8)


def test_stratonovich_is_single_mode_homodyne(jc_operators, jc_mode):
    H, _, rho0 = jc_operators
    two = HierarchyState.vacuum(HierarchyStructure(2, 2), rho0)
    with pytest.raises(UnsupportedError):
        step_stratonovich(two, H, [jc_mode, jc_mode], 1e-3, 0.0)
    heterodyne = ModeSpec(2.0, 1.0, 3.0, sigma_minus(), Detection.HETERODYNE)
    with pytest.raises(UnsupportedError):
        step_stratonovich(HierarchyState.vacuum(HierarchyStructure(1, 2), rho0), H, [heterodyne], 1e-3, 0.0)


def test_stratonovich_decoupled_atom_is_unitary():
    H = 0.5 * pauli("z") + 0.3 * pauli("x")
    modes = [ModeSpec(0.0, 1.0, 2.0, sigma_minus(), Detection.HOMODYNE)]
    rho0 = projector(ket(2, 0))
    state = HierarchyState.vacuum(HierarchyStructure(1, 2), rho0)
    for current in np.linspace(-20.0, 20.0, 1000):
        state = step_stratonovich(state, H, modes, 1e-3, current)
    U = expm(-1j * H * 1.0)
    assert np.allclose(state.physical, U @ rho0 @ U.conj().T, atol=1e-5)


def test_redfield_operator_without_atom_dynamics():
    g, delta, kappa = 2.0, 1.0, 3.0
    L = sigma_minus()
    times = np.linspace(0.0, 2.0, 2001)
    w = complex(kappa, delta)
    exact = g ** 2 * ((1 - np.exp(-w * times)) / w)[:, None, None] * L
    for convention in ("closure", "verbatim"):
        Lbar = redfield_operator(np.zeros((2, 2)), L, g, delta, kappa, times, convention)
        assert np.allclose(Lbar, exact, atol=1e-10)
    assert compare_redfield_conventions(np.zeros((2, 2)), L, g, delta, kappa, times) < 1e-12


def test_redfield_operator_argument_checks():
    with pytest.raises(ValueError):
        redfield_operator(np.zeros((2, 2)), sigma_minus(), 1.0, 0.0, 1.0, [0.0, 1.0], "markov")
    with pytest.raises(ValueError):
        redfield_operator(np.zeros((2, 2)), sigma_minus(), 1.0, 0.0, 1.0, [0.5, 1.0])


def test_conditioned_redfield_step_returns_a_state(rng):
    H = 0.5 * pauli("z")
    L = sigma_minus()
    times = np.linspace(0.0, 0.5, 501)
    Lbar = redfield_operator(H, L, 2.0, 1.0, 3.0, times)
    rho = random_density_matrix(2, rng)
    for s, dW in enumerate(0.03 * rng.standard_normal(500)):
        rho = conditioned_redfield_step(rho, Lbar[s], L, H, 3.0, 2.0, 1e-3, dW)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(rho, rho.conj().T)


def test_bad_cavity_map_keeps_pure_states_pure(rng):
    H = 0.5 * pauli("z") + 0.2 * pauli("x")
    rho = projector(ket(2, 0))
    for dW in 0.03 * rng.standard_normal(500):
        rho = bad_cavity_step(rho, 2.0, 10.0, sigma_minus(), H, 1e-3, dW)
    assert purity(rho) == pytest.approx(1.0, abs=1e-10)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)


def test_dark_state_has_no_drift():
    H = 0.5 * pauli("z")
    modes = [ModeSpec(2.0, 1.0, 3.0, sigma_minus(), Detection.HOMODYNE)]
    state = HierarchyState.vacuum(HierarchyStructure(1, 4), projector(ket(2, 1)))
    assert np.max(np.abs(heom_drift(state, H, modes))) == 0.0


def test_zero_coupling_mode_is_inert(rng, jc_operators, jc_mode):
    H, _, rho0 = jc_operators
    structure = HierarchyStructure(2, 2)
    increments = 0.03 * rng.standard_normal((50, 2))
    runs = []
    for detection in (Detection.HOMODYNE, Detection.UNMONITORED):
        modes = [jc_mode, ModeSpec(0.0, 0.5, 1.0, sigma_minus(), detection)]
        state = HierarchyState.vacuum(structure, rho0)
        for dW in increments:
            state = step_ito(state, H, modes, 1e-3, list(dW))
        runs.append(state)
    assert np.allclose(runs[0].matrices, runs[1].matrices, atol=1e-14)


def _closure_residual(g):
    """Largest ||rho^(1,0) - Lbar rho^(0,0)||_1 of the driven atom over t in [0, 2]."""
    H = 0.5 * pauli("z") + 0.5 * pauli("x")
    L = sigma_minus()
    mode = ModeSpec(g, 1.0, 3.0, L, Detection.HOMODYNE)
    times = np.linspace(0.0, 2.0, 2001)
    Lbar = redfield_operator(H, L, g, 1.0, 3.0, times)
    structure = HierarchyStructure(1, 4)
    p10, _ = structure.first_level(0)

    def residual(state):
        s = int(round(state.time / 1e-3))
        return {"residual": trace_norm(state.matrices[p10] - Lbar[s] @ state.matrices[0])}

    start = HierarchyState.vacuum(structure, projector(ket(2, 0)))
    solution = integrate_average(start, H, [mode], times[::100], observe=residual)
    return max(record["residual"] for record in solution.records)


def test_redfield_closure_error_is_second_order():
    coarse, fine = _closure_residual(0.1), _closure_residual(0.05)
    assert fine > 0.0
    assert coarse / fine > 8.0


def test_dynamic_feedback_cancels_jz_kick():
    n_atoms, g, kappa = 4, 0.5, 1.0
    H = np.zeros((n_atoms + 1, n_atoms + 1))
    modes = [spin_mode(n_atoms, g, kappa)]
    jz = collective_spin(n_atoms, "z")
    structure = HierarchyStructure(1, 4)
    start = HierarchyState.vacuum(structure, projector(coherent_spin_state_x(n_atoms)))
    state = integrate_average(start, H, modes, [0.0, 0.5]).final
    feedback = FeedbackSpec(0, collective_spin(n_atoms, "y") / np.sqrt(2 * kappa), dynamic=True)

    def kicked(dW, fb):
        after = step_ito(state, H, modes, 1e-3, [dW], feedback=fb)
        return float(np.trace(jz @ after.physical).real)

    assert abs(kicked(0.01, feedback)) < 1e-10
    assert abs(kicked(0.01, feedback) - kicked(-0.01, feedback)) < 1e-10
    assert abs(kicked(0.01, None) - kicked(-0.01, None)) > 1e-4


def _ito_and_stratonovich(H, mode, rho0, fine, factor, dt_fine):
    """Both schemes on one Brownian path, stepping ``factor`` fine increments at a time."""
    dt = factor * dt_fine
    increments = fine.reshape(-1, factor).sum(axis=1)
    structure = HierarchyStructure(1, 4)
    ito = strat = HierarchyState.vacuum(structure, rho0)
    for dW in increments:
        current = mode.sqrt_2kappa * quadrature_expectation(strat, [mode], 0) + dW / dt
        strat = step_stratonovich(strat, H, [mode], dt, current)
        ito = step_ito(ito, H, [mode], dt, [dW])
    return trace_norm(ito.physical - strat.physical) / 2


def test_stratonovich_and_ito_agree_as_dt_shrinks(rng, jc_operators, jc_mode):
    H, _, rho0 = jc_operators
    dt_fine, steps = 2.5e-4, 2000
    gaps = np.zeros(3)
    for _ in range(4):
        fine = np.sqrt(dt_fine) * rng.standard_normal(steps)
        gaps += [_ito_and_stratonovich(H, jc_mode, rho0, fine, factor, dt_fine) for factor in (4, 2, 1)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.6 * gaps[0]
