"""
Shared-path comparison of the conditioned hierarchy, the conditioned Redfield
equation and the bad-cavity limit against the full atom + cavity oracle.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from app.config import settings
from app.core.errors import CheomError, ConfigError, UnsupportedError
from app.experiments.builders import Scenario, compile_scenario
from app.experiments.config import ScenarioConfig
from app.experiments.runner import ENSEMBLE_CHUNK, as_scenario, initial_state
from app.experiments.statistics import SeriesAccumulator, compute_series_stats
from app.heom.baselines import bad_cavity_step, compare_redfield_conventions, conditioned_redfield_step, redfield_operator
from app.heom.detection import quadrature_expectation
from app.heom.integrators import step_ito
from app.heom.modes import Detection
from app.measures.information import trace_distance
from app.noise.paths import record_trajectory_path
from app.oracle.sme import sme_homodyne_step
from app.oracle.system import FullSystem, reduced_state

logger = logging.getLogger(__name__)

DRIVES = ("noise", "current")
REDFIELD = "redfield"
BAD_CAVITY = "bad_cavity"


def heom_label(k_max: int) -> str:
    return f"heom_k{k_max}"


def _check_comparable(scenario: Scenario) -> None:
    if len(scenario.modes) != 1 or scenario.modes[0].detection != Detection.HOMODYNE:
        raise UnsupportedError("oracle comparison is implemented for a single homodyne mode")
    if scenario.feedback is not None:
        raise UnsupportedError("oracle comparison runs without feedback")


def _redfield_quadrature(rho: np.ndarray, Lbar: np.ndarray, g: float) -> float:
    """<a + a^dag> with <a> = -i tr(Lbar rho) / g."""
    if g == 0.0:
        return 0.0
    return 2.0 * float((-1j / g * np.trace(Lbar @ rho)).real)


def compare_trajectory(
    scenario: Scenario,
    trajectory_index: int,
    k_max_list: Sequence[int],
    Lbar: np.ndarray,
    n_max: int,
    drive: str = "noise",
) -> dict:
    """
    One shared-path trajectory of every method.

    Returns:
        dict of trace-distance series (one value per record time) keyed by method
    """
    mode = scenario.modes[0]
    L, g, kappa, dt = mode.coupling_op, mode.g, mode.kappa, scenario.dt
    s2k = mode.sqrt_2kappa
    path = record_trajectory_path(scenario.master_seed, trajectory_index, scenario.steps, dt, scenario.driver_kinds)

    # Step 1: initial states
    system = FullSystem.from_modes(scenario.H_A, scenario.modes, n_max)
    oracle = system.product_state(scenario.rho0)
    heom = {k: initial_state(scenario, k) for k in k_max_list}
    redfield = scenario.rho0.copy()
    bad = scenario.rho0.copy()

    def distances() -> dict:
        exact = reduced_state(oracle, system)
        row = {heom_label(k): trace_distance(state.physical, exact) for k, state in heom.items()}
        row[REDFIELD] = trace_distance(redfield, exact)
        row[BAD_CAVITY] = trace_distance(bad, exact)
        return row

    rows = [distances()]
    # Step 2: march every method on the same increments
    for s in range(scenario.steps):
        dW = float(path.increment(0, s))
        if drive == "current":
            x_exact = 2.0 * oracle.expect(system.a_ops[0]).real
            current = s2k * x_exact * dt + dW
            heom_noise = {k: current - s2k * quadrature_expectation(st, scenario.modes, 0) * dt for k, st in heom.items()}
            redfield_noise = current - s2k * _redfield_quadrature(redfield, Lbar[s], g) * dt
            bad_noise = current - s2k * _redfield_quadrature(bad, g ** 2 * L / kappa, g) * dt
        else:
            heom_noise = {k: dW for k in heom}
            redfield_noise = bad_noise = dW

        oracle = sme_homodyne_step(oracle, system, dt, [dW])
        for k, st in heom.items():
            heom[k] = step_ito(st, scenario.H_A, scenario.modes, dt, [heom_noise[k]])
        redfield = conditioned_redfield_step(redfield, Lbar[s], L, scenario.H_A, kappa, g, dt, redfield_noise)
        bad = bad_cavity_step(bad, g, kappa, L, scenario.H_A, dt, bad_noise)
        if (s + 1) % scenario.record_every == 0:
            rows.append(distances())

    return {name: np.array([row[name] for row in rows]) for name in rows[0]}


def _compare_chunk(config: ScenarioConfig, indices: list[int], k_max_list: Sequence[int], Lbar: np.ndarray, n_max: int, drive: str) -> SeriesAccumulator:
    scenario = compile_scenario(config)
    acc = SeriesAccumulator()
    for index in indices:
        try:
            acc.add(compare_trajectory(scenario, index, k_max_list, Lbar, n_max, drive))
        except CheomError as e:
            if isinstance(e, ConfigError):
                raise
            raise type(e)(f"comparison trajectory {index} failed: {e}") from e
    return acc


@dataclass
class ComparisonResult:
    frame: pd.DataFrame
    summary: dict = field(default_factory=dict)


def oracle_compare(
    config: Union[ScenarioConfig, Scenario],
    trajectories: Optional[int] = None,
    k_max_list: Sequence[int] = (2, 4, 6),
    drive: str = "noise",
    n_max: Optional[int] = None,
    threads: Optional[int] = None,
) -> ComparisonResult:
    """
    Mean trace distance to the exact conditioned atom state, per method.

    Args:
        config: single-mode homodyne scenario
        trajectories: number of shared noise paths
        k_max_list: hierarchy depths to compare
        drive: "noise" (identical dW everywhere) or "current" (every method
            follows the oracle's homodyne current with its own innovation)
        n_max: oracle Fock cutoff, defaults to truncation.n_max
        threads: joblib workers

    Returns:
        ComparisonResult: frame with columns t, <method>.mean, <method>.stderr,
        and a summary of time-averaged distances
    """
    if drive not in DRIVES:
        raise ValueError(f"unknown drive '{drive}', expected one of {DRIVES}")
    scenario = as_scenario(config)
    _check_comparable(scenario)
    m = trajectories or scenario.trajectories
    n_max = n_max or scenario.config.truncation.n_max
    threads = threads or settings.threads
    k_max_list = sorted(set(int(k) for k in k_max_list))
    started = time.perf_counter()

    # Step 1: Redfield operator on the step grid
    mode = scenario.modes[0]
    step_grid = np.arange(scenario.steps + 1) * scenario.dt
    convention = scenario.config.conventions.redfield_convention
    Lbar = redfield_operator(scenario.H_A, mode.coupling_op, mode.g, mode.delta, mode.kappa, step_grid, convention)
    if convention == "verbatim":
        compare_redfield_conventions(scenario.H_A, mode.coupling_op, mode.g, mode.delta, mode.kappa, step_grid)

    # Step 2: shared-path trajectories, reduced in index order
    logger.info("oracle comparison '%s': %d trajectories, k_max %s, drive=%s, n_max=%d", scenario.name, m, k_max_list, drive, n_max)
    chunks = [list(range(i, min(i + ENSEMBLE_CHUNK, m))) for i in range(0, m, ENSEMBLE_CHUNK)]
    partials = Parallel(n_jobs=threads)(
        delayed(_compare_chunk)(scenario.config, chunk, k_max_list, Lbar, n_max, drive) for chunk in chunks
    )
    acc = SeriesAccumulator()
    for partial in partials:
        acc.merge(partial)
    stats = compute_series_stats(acc)

    # Step 3: table and summary
    frame = pd.DataFrame({"t": scenario.record_times()})
    for name in stats["mean"]:
        frame[f"{name}.mean"] = stats["mean"][name]
        frame[f"{name}.stderr"] = stats["stderr"][name]
    averages = {name: float(np.mean(values)) for name, values in stats["mean"].items()}
    order = [REDFIELD] + [heom_label(k) for k in k_max_list]
    summary = {
        "trajectories": m,
        "drive": drive,
        "n_max": n_max,
        "time_averaged_distance": averages,
        "max_distance": {name: float(np.max(values)) for name, values in stats["mean"].items()},
        "converging": bool(all(averages[a] > averages[b] for a, b in zip(order, order[1:]))),
    }
    logger.info("oracle comparison '%s' finished in %.1f s", scenario.name, time.perf_counter() - started)
    return ComparisonResult(frame, summary)
