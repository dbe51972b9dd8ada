"""
Deterministic feedback studies on the spin-squeezing model: the feedback
master equation, lambda scans, and the switched-lambda protocol.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.signal import argrelmin

from app.config import settings
from app.core.errors import ConfigError
from app.core.operators import collective_spin
from app.experiments.builders import Scenario, compile_scenario
from app.experiments.config import FeedbackConfig, ScenarioConfig, ScheduleConfig, SpinSqueezingModel, load_config
from app.experiments.observables import observe
from app.experiments.runner import as_scenario, initial_state
from app.heom.feedback import jz_x_correlation
from app.heom.integrators import integrate_average

logger = logging.getLogger(__name__)

# scan window in units of Omega
SCAN_START = -0.6
SCAN_STOP = 1.4
SCAN_STEP = 0.01
KMAX_CHECK_INCREMENT = 2


@dataclass
class DeterministicSeries:
    times: np.ndarray
    series: dict
    states: np.ndarray
    manifest: dict = field(default_factory=dict)

    @property
    def xi2_min(self) -> float:
        return float(np.min(self.series["xi2"]))

    @property
    def t_min(self) -> float:
        return float(self.times[int(np.argmin(self.series["xi2"]))])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"t": self.times})
        for name, values in self.series.items():
            frame[name] = values
        return frame


def _require_spin_model(config: ScenarioConfig) -> SpinSqueezingModel:
    if not isinstance(config.model, SpinSqueezingModel):
        raise ConfigError("model.kind", "feedback studies need the spin_squeezing model")
    return config.model


def with_feedback(config: ScenarioConfig, feedback: Optional[FeedbackConfig]) -> ScenarioConfig:
    data = config.model_dump(mode="json")
    data["feedback"] = feedback.model_dump(mode="json") if feedback is not None else None
    return load_config(data)


def with_constant_lambda(config: ScenarioConfig, strength: float) -> ScenarioConfig:
    return with_feedback(config, FeedbackConfig(schedule=ScheduleConfig(starts=[0.0], values=[float(strength)])))


def feedback_master_equation(config: Union[ScenarioConfig, Scenario]) -> DeterministicSeries:
    """
    Noise-free hierarchy with the feedback drift terms, on the record grid.

    Args:
        config: spin-squeezing scenario; feedback absent (lambda = 0) or given
            as a strength schedule

    Returns:
        DeterministicSeries with xi2 always among the series
    """
    scenario = as_scenario(config)
    _require_spin_model(scenario.config)
    names = list(dict.fromkeys(["xi2", *scenario.config.outputs]))
    solution = integrate_average(
        initial_state(scenario),
        scenario.H_A,
        scenario.modes,
        scenario.record_times(),
        feedback=scenario.feedback,
        observe=lambda state: observe(scenario, state, names),
    )
    series = {name: np.array([row[name] for row in solution.records]) for name in solution.records[0]}
    fb = scenario.config.feedback
    return DeterministicSeries(
        times=solution.times,
        series=series,
        states=solution.physical,
        manifest={
            "scenario": scenario.name,
            "k_max": scenario.k_max,
            "schedule": fb.schedule.model_dump() if fb is not None and fb.schedule is not None else None,
        },
    )


def _scan_point(config: ScenarioConfig, strength: float) -> tuple[float, float, float]:
    run = feedback_master_equation(with_constant_lambda(config, strength))
    return strength, run.xi2_min, run.t_min


def default_lambdas(omega: float) -> np.ndarray:
    count = int(round((SCAN_STOP - SCAN_START) / SCAN_STEP)) + 1
    return omega * np.round(np.linspace(SCAN_START, SCAN_STOP, count), 10)


def lambda_scan(
    config: ScenarioConfig,
    lambdas: Optional[Sequence[float]] = None,
    threads: Optional[int] = None,
) -> pd.DataFrame:
    """
    Minimum over time of xi2 for each constant feedback strength.

    Returns:
        DataFrame with columns lambda, xi2_min, t_min (one row per strength)
    """
    model = _require_spin_model(config)
    values = default_lambdas(model.omega) if lambdas is None else np.asarray(lambdas, dtype=float)
    threads = threads or settings.threads
    logger.info("lambda scan on '%s': %d strengths in [%.4g, %.4g], %d worker(s)",
                config.name, len(values), values.min(), values.max(), threads)
    rows = Parallel(n_jobs=threads)(delayed(_scan_point)(config, float(v)) for v in values)
    return pd.DataFrame(rows, columns=["lambda", "xi2_min", "t_min"])


def locate_minima(scan: pd.DataFrame) -> pd.DataFrame:
    """
    Local minima of xi2_min along a lambda scan.

    Interior rows are strict local minima. An end row lower than its neighbour
    is reported too, flagged ``boundary``, since the true minimum may lie
    outside the scanned window.

    Returns:
        the matching scan rows in lambda order plus a boolean ``boundary`` column
    """
    xi2 = scan["xi2_min"].to_numpy()
    if len(xi2) < 3:
        rows = scan.iloc[[int(np.argmin(xi2))]].reset_index(drop=True)
        rows["boundary"] = True
        return rows
    (interior,) = argrelmin(xi2)
    edges = [i for i, inner in ((0, 1), (len(xi2) - 1, len(xi2) - 2)) if xi2[i] < xi2[inner]]
    positions = sorted(set(interior.tolist()) | set(edges))
    rows = scan.iloc[positions].reset_index(drop=True)
    rows["boundary"] = [p in edges for p in positions]
    for lam in rows.loc[rows["boundary"], "lambda"]:
        logger.warning("xi2 minimum at the scan edge lambda=%.4g, widen the scan window", lam)
    return rows


def estimate_lambda_star(config: ScenarioConfig) -> dict:
    """
    Adiabatic strength estimate lambda* = 2 kappa max_t <J_z X>(t) / <J_x(0)>
    from the run without feedback.
    """
    model = _require_spin_model(config)
    scenario = compile_scenario(with_feedback(config, None))
    mode = scenario.modes[0]
    jz = collective_spin(model.n_atoms, "z")
    solution = integrate_average(
        initial_state(scenario),
        scenario.H_A,
        scenario.modes,
        scenario.record_times(),
        observe=lambda state: {"jz_x": jz_x_correlation(state, mode.g, jz)},
    )
    jz_x = np.array([row["jz_x"] for row in solution.records])
    mean_jx0 = float(np.trace(collective_spin(model.n_atoms, "x") @ scenario.rho0).real)
    peak = int(np.argmax(jz_x))
    return {
        "lambda_star": 2 * mode.kappa * float(jz_x[peak]) / mean_jx0,
        "jz_x_max": float(jz_x[peak]),
        "t_at_max": float(solution.times[peak]),
        "mean_jx0": mean_jx0,
    }


def check_kmax(
    config: ScenarioConfig,
    lambdas: Optional[Sequence[float]] = None,
    threads: Optional[int] = None,
    scan: Optional[pd.DataFrame] = None,
) -> dict:
    """
    Rerun the scan at k_max + 2 and pair each located minimum with the nearest
    refined one.

    Returns:
        dict with keys: k_max, refined_k_max, minima, refined_minima, max_shift
    """
    k_max = config.truncation.k_max
    if scan is None:
        scan = lambda_scan(config, lambdas, threads)
    data = config.model_dump(mode="json")
    data["truncation"]["k_max"] = k_max + KMAX_CHECK_INCREMENT
    refined = lambda_scan(load_config(data), scan["lambda"].to_numpy(), threads)

    coarse_minima = locate_minima(scan)["lambda"].to_numpy()
    refined_minima = locate_minima(refined)["lambda"].to_numpy()
    if len(coarse_minima) and len(refined_minima):
        shifts = [float(np.min(np.abs(refined_minima - lam))) for lam in coarse_minima]
        max_shift = max(shifts)
    else:
        max_shift = float("nan")
    if max_shift > SCAN_STEP * config.model.omega:
        logger.warning("lambda minima moved by %.4g between k_max=%d and k_max=%d", max_shift, k_max, k_max + KMAX_CHECK_INCREMENT)
    return {
        "k_max": k_max,
        "refined_k_max": k_max + KMAX_CHECK_INCREMENT,
        "minima": coarse_minima.tolist(),
        "refined_minima": refined_minima.tolist(),
        "max_shift": max_shift,
    }


def switching_protocol(
    config: ScenarioConfig,
    lambda_plus: float,
    lambda_minus: float,
    t1: float,
    t2: float,
) -> DeterministicSeries:
    """Feedback master equation with lambda_plus on [0, t1), lambda_minus on [t1, t2), lambda_plus after."""
    _require_spin_model(config)
    t_final = config.integrator.t_final
    if not 0 < t1 < t2 < t_final:
        raise ConfigError("feedback.schedule.starts", f"need 0 < t1 < t2 < t_final, got t1={t1}, t2={t2}, t_final={t_final}")
    schedule = ScheduleConfig(starts=[0.0, t1, t2], values=[lambda_plus, lambda_minus, lambda_plus])
    return feedback_master_equation(with_feedback(config, FeedbackConfig(schedule=schedule)))
