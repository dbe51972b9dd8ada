"""
Trajectory and ensemble runners for the conditioned hierarchy.
"""
import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from app.config import settings
from app.core.errors import CheomError, ConfigError
from app.core.linalg import partial_trace
from app.experiments.builders import Scenario, compile_scenario
from app.experiments.config import ScenarioConfig
from app.experiments.observables import _clipped, observe
from app.experiments.statistics import SeriesAccumulator, compute_series_stats
from app.heom.detection import mean_field, quadrature_expectation
from app.heom.hierarchy import HierarchyState, HierarchyStructure
from app.heom.integrators import photodetect_step, step_ito, step_stratonovich
from app.heom.modes import Detection
from app.measures.information import information_gain, von_neumann_entropy
from app.noise.paths import NoisePath, record_trajectory_path
from app.noise.streams import JumpClock

logger = logging.getLogger(__name__)

ENSEMBLE_CHUNK = 8


@lru_cache(maxsize=32)
def hierarchy_structure(modes: int, k_max: int) -> HierarchyStructure:
    return HierarchyStructure(modes, k_max)


def as_scenario(config: Union[ScenarioConfig, Scenario]) -> Scenario:
    return config if isinstance(config, Scenario) else compile_scenario(config)


def initial_state(scenario: Scenario, k_max: Optional[int] = None) -> HierarchyState:
    structure = hierarchy_structure(len(scenario.modes), scenario.k_max if k_max is None else k_max)
    return HierarchyState.vacuum(structure, scenario.rho0)


@dataclass
class RunRecord:
    """Observables on the record grid of one trajectory."""

    times: np.ndarray
    series: dict
    currents: dict = field(default_factory=dict)
    jump_times: dict = field(default_factory=dict)
    states: Optional[np.ndarray] = None
    manifest: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        """
        Columns: t, observables, then binned currents current.<mode>[.re|.im].

        A current sample is the mean over the bin ending at its row, so the t = 0
        row has no current and holds NaN there.
        """
        frame = pd.DataFrame({"t": self.times})
        for name, values in self.series.items():
            frame[name] = values
        for k, values in self.currents.items():
            if np.iscomplexobj(values):
                frame[f"current.{k}.re"] = values.real
                frame[f"current.{k}.im"] = values.imag
            else:
                frame[f"current.{k}"] = values
        return frame

    def jumps_frame(self) -> pd.DataFrame:
        rows = [(k, t) for k, times in self.jump_times.items() for t in times]
        return pd.DataFrame(rows, columns=["mode", "t"])


def _current_increment(state: HierarchyState, scenario: Scenario, k: int, increment) -> complex:
    """Integrated current over one step: sqrt(2k) <X> dt + dW (homodyne) or sqrt(2k) <a> dt + dW_c."""
    mode = scenario.modes[k]
    if mode.detection == Detection.HOMODYNE:
        return mode.sqrt_2kappa * quadrature_expectation(state, scenario.modes, k) * scenario.dt + increment
    return mode.sqrt_2kappa * mean_field(state, scenario.modes, k) * scenario.dt + increment


def run_trajectory(
    config: Union[ScenarioConfig, Scenario],
    trajectory_index: int = 0,
    path: Optional[NoisePath] = None,
    keep_states: bool = False,
    averaged: bool = False,
) -> RunRecord:
    """
    Integrate one conditioned trajectory.

    Args:
        config: scenario (config or compiled)
        trajectory_index: selects the noise streams derived from the master seed
        path: replay this noise path instead of drawing one
        keep_states: also return rho^(0,0) on the record grid
        averaged: drop every measurement term (unconditioned hierarchy)

    Returns:
        RunRecord, deterministic in (master_seed, trajectory_index)
    """
    scenario = as_scenario(config)
    dt, steps, every = scenario.dt, scenario.steps, scenario.record_every
    stratonovich = scenario.config.integrator.scheme == "stratonovich"

    # Step 1: noise
    if path is None:
        path = record_trajectory_path(scenario.master_seed, trajectory_index, steps, dt, scenario.driver_kinds)
    clocks = {
        k: JumpClock(path.thresholds(k))
        for k, mode in enumerate(scenario.modes)
        if mode.detection == Detection.PHOTODETECT and not averaged
    }
    current_modes = [k for k, mode in enumerate(scenario.modes) if mode.detection in (Detection.HOMODYNE, Detection.HETERODYNE)]

    # Step 2: initial hierarchy and first record
    state = initial_state(scenario)
    times = scenario.record_times()
    rows = [observe(scenario, state)]
    states = [state.physical.copy()] if keep_states else None
    currents = {k: [complex(np.nan, np.nan)] for k in current_modes}
    binned = {k: 0j for k in current_modes}
    jump_times = {k: [] for k in clocks}

    # Step 3: integrate
    try:
        for s in range(steps):
            increments = path.step_increments(s)
            for k in current_modes:
                binned[k] += _current_increment(state, scenario, k, increments[k])
            if stratonovich:
                mode = scenario.modes[0]
                current = mode.sqrt_2kappa * quadrature_expectation(state, scenario.modes, 0) + increments[0] / dt
                state = step_stratonovich(state, scenario.H_A, scenario.modes, dt, current, scenario.feedback)
            elif clocks:
                state, fired = photodetect_step(
                    state, scenario.H_A, scenario.modes, dt, clocks, increments,
                    scenario.feedback, scenario.theta, scenario.heterodyne_sign,
                )
                for k in clocks:
                    if fired[k]:
                        jump_times[k].append(state.time)
            else:
                state = step_ito(
                    state, scenario.H_A, scenario.modes, dt, increments,
                    scenario.feedback, scenario.theta, scenario.heterodyne_sign, averaged,
                )
            if (s + 1) % every == 0:
                rows.append(observe(scenario, state))
                if keep_states:
                    states.append(state.physical.copy())
                for k in current_modes:
                    currents[k].append(binned[k] / (every * dt))
                    binned[k] = 0j
    except CheomError as e:
        if isinstance(e, ConfigError):
            raise
        raise type(e)(f"trajectory {trajectory_index} of '{scenario.name}' failed at t={state.time:.6g}: {e}") from e

    series = {name: np.array([row[name] for row in rows]) for name in rows[0]}
    current_arrays = {}
    for k, values in currents.items():
        values = np.array(values, dtype=complex)
        current_arrays[k] = values if scenario.modes[k].detection == Detection.HETERODYNE else values.real
    return RunRecord(
        times=times,
        series=series,
        currents=current_arrays,
        jump_times=jump_times,
        states=np.array(states) if keep_states else None,
        manifest={
            "scenario": scenario.name,
            "master_seed": scenario.master_seed,
            "trajectory_index": trajectory_index,
            "k_max": scenario.k_max,
            "dt": dt,
        },
    )


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean: dict
    stderr: dict
    mean_state: np.ndarray
    trajectories: int
    derived: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        """<name>.mean and <name>.stderr per series; current columns are NaN at t = 0 as in RunRecord."""
        frame = pd.DataFrame({"t": self.times})
        for name in self.mean:
            frame[f"{name}.mean"] = self.mean[name]
            frame[f"{name}.stderr"] = self.stderr[name]
        for name, values in self.derived.items():
            frame[name] = values
        return frame


def _run_chunk(config: ScenarioConfig, indices: list[int], averaged: bool) -> SeriesAccumulator:
    scenario = compile_scenario(config)
    acc = SeriesAccumulator()
    for index in indices:
        record = run_trajectory(scenario, index, keep_states=True, averaged=averaged)
        series = dict(record.series)
        for k, values in record.currents.items():
            if np.iscomplexobj(values):
                series[f"current.{k}.re"] = values.real
                series[f"current.{k}.im"] = values.imag
            else:
                series[f"current.{k}"] = values
        acc.add(series, record.states)
        logger.debug("trajectory %d of '%s' done", index, scenario.name)
    return acc


def _entropy_series(states: np.ndarray) -> np.ndarray:
    return np.array([von_neumann_entropy(_clipped(rho)) for rho in states])


def run_ensemble(
    config: Union[ScenarioConfig, Scenario],
    trajectories: Optional[int] = None,
    threads: Optional[int] = None,
    averaged: bool = False,
) -> EnsembleResult:
    """
    Sample means and standard errors over trajectories 0..M-1.

    Trajectories are reduced in index order in fixed-size chunks, so the
    result does not depend on ``threads``.
    """
    scenario = as_scenario(config)
    m = trajectories or scenario.trajectories
    if m < 1:
        raise ValueError(f"need at least one trajectory, got {m}")
    threads = threads or settings.threads
    started = time.perf_counter()
    logger.info("ensemble '%s': %d trajectories, seed %d, %d worker(s)", scenario.name, m, scenario.master_seed, threads)

    chunks = [list(range(i, min(i + ENSEMBLE_CHUNK, m))) for i in range(0, m, ENSEMBLE_CHUNK)]
    partials = Parallel(n_jobs=threads)(delayed(_run_chunk)(scenario.config, chunk, averaged) for chunk in chunks)
    acc = SeriesAccumulator()
    for partial in partials:
        acc.merge(partial)

    stats = compute_series_stats(acc)
    mean_state = acc.state_sum / acc.count
    derived = {}
    outputs = scenario.config.outputs
    if "entropy" in outputs:
        derived["entropy_of_mean"] = _entropy_series(mean_state)
        derived["information_gain"] = np.array([
            information_gain(e, s) for e, s in zip(stats["mean"]["entropy"], derived["entropy_of_mean"])
        ])
    if "entropy_13" in outputs:
        layout = scenario.atom_layout
        outer = [layout.labels[0], layout.labels[-1]]
        derived["entropy_13_of_mean"] = _entropy_series(np.array([partial_trace(rho, layout, outer) for rho in mean_state]))
        derived["information_gain_13"] = derived["entropy_13_of_mean"] - stats["mean"]["entropy_13"]

    logger.info("ensemble '%s' finished in %.1f s", scenario.name, time.perf_counter() - started)
    return EnsembleResult(
        times=scenario.record_times(),
        mean=stats["mean"],
        stderr=stats["stderr"],
        mean_state=mean_state,
        trajectories=m,
        derived=derived,
    )
