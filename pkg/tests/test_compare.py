from pathlib import Path

import numpy as np
import pytest

from app.core.errors import UnsupportedError
from app.experiments.builders import build_jaynes_cummings, compile_scenario, with_overrides
from app.experiments.compare import compare_trajectory, oracle_compare
from app.experiments.config import parse_config
from app.experiments.runner import run_trajectory
from app.heom.baselines import bad_cavity_step, redfield_operator
from app.heom.modes import Detection
from app.measures.information import purity
from app.noise.paths import record_trajectory_path

MODELS = Path(__file__).resolve().parent.parent / "app" / "models"


def short_jc(detection=Detection.HOMODYNE):
    return with_overrides(build_jaynes_cummings(1.0, 0.0, 2.0, 1.0, 3.0, detection=detection, t_final=0.1), seed=4)


def _redfield_grid(scenario):
    mode = scenario.modes[0]
    grid = np.arange(scenario.steps + 1) * scenario.dt
    return redfield_operator(scenario.H_A, mode.coupling_op, mode.g, mode.delta, mode.kappa, grid)


def test_comparison_table_layout():
    result = oracle_compare(short_jc(), trajectories=2, k_max_list=[2, 1], n_max=4, threads=1)
    frame = result.frame
    assert frame.columns[0] == "t"
    for method in ("heom_k1", "heom_k2", "redfield", "bad_cavity"):
        assert f"{method}.mean" in frame and f"{method}.stderr" in frame
        assert frame[f"{method}.mean"].iloc[0] == pytest.approx(0.0, abs=1e-12)
    summary = result.summary
    assert summary["trajectories"] == 2
    assert summary["n_max"] == 4
    assert set(summary["time_averaged_distance"]) == {"heom_k1", "heom_k2", "redfield", "bad_cavity"}


def test_current_drive_runs():
    result = oracle_compare(short_jc(), trajectories=1, k_max_list=[2], drive="current", n_max=4, threads=1)
    assert result.summary["drive"] == "current"
    assert np.all(np.isfinite(result.frame["heom_k2.mean"]))


def test_deep_hierarchy_tracks_the_oracle():
    scenario = compile_scenario(short_jc())
    distances = compare_trajectory(scenario, 0, [4], _redfield_grid(scenario), n_max=4)
    # single excitation: the top Fock level stays empty, so both updates coincide
    assert np.max(distances["heom_k4"]) < 1e-8


def test_second_level_closes_the_single_excitation_sector():
    scenario = compile_scenario(with_overrides(build_jaynes_cummings(1.0, 0.0, 2.0, 1.0, 3.0, t_final=0.5), seed=11))
    Lbar = _redfield_grid(scenario)
    for index in range(3):
        distances = compare_trajectory(scenario, index, [2], Lbar, n_max=3)
        assert np.max(distances["heom_k2"]) < 1e-4
        assert np.max(distances["redfield"]) > 1e-4


def test_current_drive_matches_noise_drive_for_exact_methods():
    scenario = compile_scenario(short_jc())
    Lbar = _redfield_grid(scenario)
    by_noise = compare_trajectory(scenario, 1, [2], Lbar, n_max=3, drive="noise")
    by_current = compare_trajectory(scenario, 1, [2], Lbar, n_max=3, drive="current")
    assert np.max(by_current["heom_k2"]) < 1e-4
    assert np.allclose(by_noise["heom_k2"], by_current["heom_k2"], atol=1e-4)


def test_comparison_rejects_other_setups():
    with pytest.raises(UnsupportedError):
        oracle_compare(short_jc(Detection.HETERODYNE), trajectories=1, threads=1)
    with pytest.raises(ValueError):
        oracle_compare(short_jc(), trajectories=1, drive="fictitious", threads=1)


@pytest.mark.slow
def test_sector_closure_over_the_full_window():
    scenario = compile_scenario(with_overrides(parse_config(MODELS / "jc_fig2.json"), k_max=2))
    Lbar = _redfield_grid(scenario)
    for index in range(20):
        distances = compare_trajectory(scenario, index, [2], Lbar, n_max=3)
        assert np.max(distances["heom_k2"]) < 1e-4


@pytest.mark.slow
def test_deeper_hierarchies_get_closer():
    result = oracle_compare(parse_config(MODELS / "jc_fig3.json"), trajectories=20, k_max_list=[2, 4, 6])
    averages = result.summary["time_averaged_distance"]
    assert averages["redfield"] > averages["heom_k2"] > averages["heom_k4"] > averages["heom_k6"]
    assert result.summary["converging"]


def test_bad_cavity_stays_pure_where_the_exact_state_mixes():
    scenario = compile_scenario(with_overrides(build_jaynes_cummings(1.0, 0.0, 2.0, 1.0, 3.0, t_final=1.0), seed=8))
    mode = scenario.modes[0]
    path = record_trajectory_path(scenario.master_seed, 0, scenario.steps, scenario.dt, scenario.driver_kinds)
    exact = run_trajectory(scenario, 0, path=path)
    rho = scenario.rho0.copy()
    bad_purity = []
    for s in range(scenario.steps):
        rho = bad_cavity_step(rho, mode.g, mode.kappa, mode.coupling_op, scenario.H_A, scenario.dt, float(path.increment(0, s)))
        bad_purity.append(purity(rho))
    assert min(bad_purity) > 1 - 1e-6
    assert np.min(exact.series["purity"]) < 0.95
