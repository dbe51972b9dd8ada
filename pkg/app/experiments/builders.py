"""
Scenario builders and compilation of a ScenarioConfig into operators.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from app.config import settings
from app.core.errors import ConfigError
from app.core.operators import (
    HilbertSpaceLayout,
    OperatorMatrix,
    coherent_spin_state_x,
    collective_spin,
    ket,
    kron_compose,
    pauli,
    projector,
    sigma_minus,
)
from app.experiments.config import (
    DickeClustersModel,
    FeedbackConfig,
    IntegratorConfig,
    JaynesCummingsModel,
    ModeConfig,
    ScenarioConfig,
    ScheduleConfig,
    SpinSqueezingModel,
    TruncationConfig,
    load_config,
)
from app.heom.modes import Detection, FeedbackSpec, ModeSpec, StrengthSchedule
from app.noise.paths import DriverKind

logger = logging.getLogger(__name__)

JC_T_FINAL = 5.0
SPIN_T_FINAL = 6.0
DICKE_T_FINAL = 3.0


def build_jaynes_cummings(
    omega: float,
    epsilon: float,
    g: float,
    delta: float,
    kappa: float,
    detection: Detection = Detection.HOMODYNE,
    k_max: int = 4,
    t_final: float = JC_T_FINAL,
    name: str = "jaynes_cummings",
) -> ScenarioConfig:
    """Single-mode JC scenario, epsilon = 0 for the undriven model."""
    if omega <= 0:
        raise ConfigError("model.omega", "omega must be positive")
    return ScenarioConfig(
        name=name,
        unit_frequency="omega",
        model=JaynesCummingsModel(omega=omega, epsilon=epsilon),
        modes=[ModeConfig(g=g, delta=delta, kappa=kappa, detection=detection)],
        truncation=TruncationConfig(k_max=k_max),
        integrator=IntegratorConfig(t_final=t_final),
        outputs=["purity", "entropy", "bloch", "excitation"],
    )


def build_dicke_clusters(
    omega: float,
    n_clusters: int,
    n_atoms: int,
    g_matrix: Sequence[Sequence[float]],
    delta: float,
    kappa: float,
    monitored_modes: Sequence[int],
    k_max: int = 3,
    t_final: float = DICKE_T_FINAL,
    name: str = "dicke_clusters",
) -> ScenarioConfig:
    """Clusters x modes coupling matrix; modes in ``monitored_modes`` are homodyned, the rest unmonitored."""
    g = np.asarray(g_matrix, dtype=float)
    if g.ndim != 2 or g.shape[0] != n_clusters:
        raise ConfigError("model.g_matrix", f"expected {n_clusters} rows (one per cluster), got shape {g.shape}")
    monitored = set(monitored_modes)
    modes = [
        ModeConfig(delta=delta, kappa=kappa, detection=Detection.HOMODYNE if k in monitored else Detection.UNMONITORED)
        for k in range(g.shape[1])
    ]
    return ScenarioConfig(
        name=name,
        unit_frequency="Omega",
        model=DickeClustersModel(omega=omega, n_clusters=n_clusters, n_atoms=n_atoms, g_matrix=g.tolist()),
        modes=modes,
        truncation=TruncationConfig(k_max=k_max),
        integrator=IntegratorConfig(t_final=t_final),
        outputs=["entropy_13", "mutual_information_13", "negativity_13"],
    )


def build_spin_squeezing(
    omega: float,
    n_atoms: int,
    g: float,
    kappa: float,
    feedback: Optional[FeedbackConfig] = None,
    k_max: int = 6,
    t_final: float = SPIN_T_FINAL,
    name: str = "spin_squeezing",
) -> ScenarioConfig:
    """Collective spin in a resonant homodyned cavity; feedback F = lambda J_y / sqrt(2 kappa)."""
    if n_atoms < 2:
        raise ConfigError("model.n_atoms", "spin squeezing needs at least two atoms")
    return ScenarioConfig(
        name=name,
        unit_frequency="Omega",
        model=SpinSqueezingModel(omega=omega, n_atoms=n_atoms),
        modes=[ModeConfig(g=g, delta=0.0, kappa=kappa)],
        truncation=TruncationConfig(k_max=k_max),
        integrator=IntegratorConfig(t_final=t_final),
        feedback=feedback,
        outputs=["xi2", "spin", "jz_x", "lambda"],
    )


def constant_feedback(strength: float) -> FeedbackConfig:
    return FeedbackConfig(schedule=ScheduleConfig(starts=[0.0], values=[float(strength)]))


@dataclass(frozen=True)
class Scenario:
    """A validated config with its operators built."""

    config: ScenarioConfig
    H_A: OperatorMatrix
    modes: tuple[ModeSpec, ...]
    rho0: OperatorMatrix
    atom_layout: HilbertSpaceLayout
    feedback: Optional[FeedbackSpec]

    @property
    def name(self) -> str:
        return self.config.name

    @property
    def dt(self) -> float:
        return self.config.integrator.dt

    @property
    def steps(self) -> int:
        return int(round(self.config.integrator.t_final / self.dt))

    @property
    def record_every(self) -> int:
        return self.config.integrator.record_every

    @property
    def k_max(self) -> int:
        return self.config.truncation.k_max

    @property
    def theta(self) -> int:
        return self.config.conventions.jump_ordering_theta

    @property
    def heterodyne_sign(self) -> int:
        return self.config.conventions.heterodyne_sign

    @property
    def master_seed(self) -> int:
        return self.config.ensemble.master_seed

    @property
    def trajectories(self) -> int:
        return self.config.ensemble.trajectories or settings.default_trajectories

    @property
    def driver_kinds(self) -> tuple[DriverKind, ...]:
        return tuple(mode.detection.driver for mode in self.modes)

    @property
    def n_atoms(self) -> Optional[int]:
        model = self.config.model
        return model.n_atoms if isinstance(model, SpinSqueezingModel) else None

    def record_times(self) -> np.ndarray:
        return np.arange(0, self.steps + 1, self.record_every) * self.dt


def _spin_feedback(config: ScenarioConfig, modes: Sequence[ModeSpec]) -> Optional[FeedbackSpec]:
    fb = config.feedback
    if fb is None:
        return None
    n_atoms = config.model.n_atoms
    mode = modes[fb.mode_index]
    operator = collective_spin(n_atoms, "y") / mode.sqrt_2kappa
    schedule = StrengthSchedule(tuple(fb.schedule.starts), tuple(fb.schedule.values)) if fb.schedule else None
    spec = FeedbackSpec(fb.mode_index, operator, schedule, fb.dynamic, fb.hold_on_singular)
    spec.validate_modes(modes)
    return spec


def compile_scenario(config: ScenarioConfig) -> Scenario:
    """Build H_A, coupling operators, the initial atom state and the feedback operator."""
    model = config.model
    if isinstance(model, JaynesCummingsModel):
        layout = HilbertSpaceLayout.of(("atom", 2))
        H_A = 0.5 * model.omega * pauli("z") + 0.5 * model.epsilon * pauli("x")
        mode = config.modes[0]
        modes = (ModeSpec(mode.g, mode.delta, mode.kappa, sigma_minus(), mode.detection),)
        rho0 = projector(ket(2, 0))
    elif isinstance(model, SpinSqueezingModel):
        dim = model.n_atoms + 1
        layout = HilbertSpaceLayout.of(("atom", dim))
        jz = collective_spin(model.n_atoms, "z")
        H_A = model.omega * jz
        mode = config.modes[0]
        modes = (ModeSpec(mode.g, 0.0, mode.kappa, 1j * jz, mode.detection),)
        rho0 = projector(coherent_spin_state_x(model.n_atoms))
    else:
        layout, H_A, modes, rho0 = _compile_dicke(config, model)

    feedback = _spin_feedback(config, modes) if isinstance(model, SpinSqueezingModel) else None
    logger.debug("compiled scenario '%s': atom dim %d, %d mode(s)", config.name, H_A.shape[0], len(modes))
    return Scenario(config, H_A, tuple(modes), rho0, layout, feedback)


def _compile_dicke(config: ScenarioConfig, model: DickeClustersModel):
    """
    g_k = max_i |g_ik| and L_k = sum_i (g_ik / g_k) J_i^x, so that
    g_k (L_k a_k + L_k^dag a_k^dag) = sum_i g_ik J_i^x (a_k + a_k^dag).
    """
    spin_dim = model.n_atoms + 1
    labels = [f"cluster{i + 1}" for i in range(model.n_clusters)]
    layout = HilbertSpaceLayout.of(*[(label, spin_dim) for label in labels])
    jz = collective_spin(model.n_atoms, "z")
    jx = collective_spin(model.n_atoms, "x")
    H_A = sum(model.omega * layout.embed(jz, label) for label in labels)
    cluster_jx = [layout.embed(jx, label) for label in labels]

    g = np.asarray(model.g_matrix, dtype=float)
    modes = []
    for k, mode in enumerate(config.modes):
        g_k = float(np.max(np.abs(g[:, k])))
        if g_k == 0.0:
            L = np.zeros((layout.dim, layout.dim), dtype=complex)
        else:
            L = sum((g[i, k] / g_k) * cluster_jx[i] for i in range(model.n_clusters))
        modes.append(ModeSpec(g_k, mode.delta, mode.kappa, L, mode.detection))

    if model.initial_state == "ground":
        single = ket(spin_dim, spin_dim - 1)
    else:
        single = coherent_spin_state_x(model.n_atoms)
    rho0 = kron_compose([projector(single)] * model.n_clusters)
    return layout, H_A, modes, rho0


def with_overrides(
    config: ScenarioConfig,
    seed: Optional[int] = None,
    trajectories: Optional[int] = None,
    dt: Optional[float] = None,
    k_max: Optional[int] = None,
) -> ScenarioConfig:
    """Copy of ``config`` with CLI overrides applied (and revalidated)."""
    data = config.model_dump(mode="json")
    if seed is not None:
        data["ensemble"]["master_seed"] = seed
    if trajectories is not None:
        data["ensemble"]["trajectories"] = trajectories
    if dt is not None:
        data["integrator"]["dt"] = dt
    if k_max is not None:
        data["truncation"]["k_max"] = k_max
    return load_config(data)
