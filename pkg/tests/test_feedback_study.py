import numpy as np
import pandas as pd
import pytest

from app.core.errors import ConfigError
from app.experiments.builders import build_jaynes_cummings, build_spin_squeezing
from app.experiments.config import load_config
from app.experiments.feedback_study import (
    check_kmax,
    default_lambdas,
    estimate_lambda_star,
    feedback_master_equation,
    lambda_scan,
    locate_minima,
    switching_protocol,
    with_constant_lambda,
)


@pytest.fixture
def spin_config():
    return build_spin_squeezing(1.0, 4, 0.5, 1.0, k_max=4, t_final=2.0)


def test_zero_strength_is_no_feedback(spin_config):
    plain = feedback_master_equation(spin_config)
    zero = feedback_master_equation(with_constant_lambda(spin_config, 0.0))
    assert np.allclose(plain.series["xi2"], zero.series["xi2"], atol=1e-12)
    assert plain.series["xi2"][0] == pytest.approx(1.0)
    assert plain.manifest["schedule"] is None


def test_feedback_changes_the_evolution(spin_config):
    plain = feedback_master_equation(spin_config)
    driven = feedback_master_equation(with_constant_lambda(spin_config, 0.3))
    assert not np.allclose(plain.series["xi2"], driven.series["xi2"])
    assert np.all(driven.series["lambda"] == 0.3)


def test_degenerate_switching_equals_constant(spin_config):
    constant = feedback_master_equation(with_constant_lambda(spin_config, 0.25))
    switched = switching_protocol(spin_config, 0.25, 0.25, 0.5, 1.2)
    assert np.allclose(switched.series["xi2"], constant.series["xi2"], atol=1e-8)


def test_switching_follows_the_schedule(spin_config):
    switched = switching_protocol(spin_config, 0.25, -0.1, 0.5, 1.2)
    times, strength = switched.times, switched.series["lambda"]
    assert np.all(strength[times < 0.5] == 0.25)
    assert np.all(strength[(times > 0.5) & (times < 1.2)] == -0.1)
    assert np.all(strength[times > 1.2] == 0.25)
    assert switched.to_frame().columns[0] == "t"


def test_switching_times_are_checked(spin_config):
    for t1, t2 in [(0.0, 1.0), (1.0, 0.5), (0.5, 2.0)]:
        with pytest.raises(ConfigError) as info:
            switching_protocol(spin_config, 0.2, -0.2, t1, t2)
        assert info.value.field_path == "feedback.schedule.starts"


def test_studies_need_the_spin_model():
    config = build_jaynes_cummings(1.0, 0.0, 2.0, 1.0, 3.0, t_final=0.1)
    with pytest.raises(ConfigError) as info:
        feedback_master_equation(config)
    assert info.value.field_path == "model.kind"


def test_scan_rows_match_single_runs(spin_config):
    scan = lambda_scan(spin_config, [-0.2, 0.0, 0.2], threads=1)
    assert list(scan.columns) == ["lambda", "xi2_min", "t_min"]
    assert len(scan) == 3
    single = feedback_master_equation(with_constant_lambda(spin_config, 0.2))
    assert scan["xi2_min"].iloc[2] == pytest.approx(single.xi2_min)
    assert scan["t_min"].iloc[2] == pytest.approx(single.t_min)


def test_default_scan_window():
    lambdas = default_lambdas(2.0)
    assert len(lambdas) == 201
    assert lambdas[0] == pytest.approx(-1.2)
    assert lambdas[-1] == pytest.approx(2.8)


def test_locate_minima():
    scan = pd.DataFrame({"lambda": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5], "xi2_min": [1.0, 0.8, 0.9, 0.7, 0.6, 0.65], "t_min": 0.0})
    assert locate_minima(scan)["lambda"].tolist() == [0.1, 0.4]
    assert locate_minima(scan.iloc[:2])["lambda"].tolist() == [0.1]
    assert not locate_minima(scan)["boundary"].any()


def test_edge_minima_are_flagged(caplog):
    scan = pd.DataFrame({"lambda": [0.0, 0.1, 0.2, 0.3, 0.4], "xi2_min": [0.7, 0.8, 0.75, 0.9, 0.6], "t_min": 0.0})
    with caplog.at_level("WARNING", logger="app.experiments.feedback_study"):
        minima = locate_minima(scan)
    assert minima["lambda"].tolist() == [0.0, 0.2, 0.4]
    assert minima["boundary"].tolist() == [True, False, True]
    assert sum("scan edge" in record.message for record in caplog.records) == 2
    rising = pd.DataFrame({"lambda": [0.0, 0.1, 0.2], "xi2_min": [0.9, 0.8, 0.7], "t_min": 0.0})
    assert locate_minima(rising)["boundary"].tolist() == [True]


def test_lambda_star_estimate(spin_config):
    estimate = estimate_lambda_star(with_constant_lambda(spin_config, 0.4))
    assert estimate["mean_jx0"] == pytest.approx(2.0)
    assert np.isfinite(estimate["lambda_star"])
    assert estimate["lambda_star"] == pytest.approx(2.0 * estimate["jz_x_max"] / 2.0)


def test_kmax_check_reports_both_depths(spin_config):
    report = check_kmax(spin_config, [-0.2, 0.0, 0.2, 0.4], threads=1)
    assert report["k_max"] == 4
    assert report["refined_k_max"] == 6
    assert set(report) == {"k_max", "refined_k_max", "minima", "refined_minima", "max_shift"}


def ten_atoms(kappa, **kwargs):
    return build_spin_squeezing(1.0, 10, 0.5, kappa, **kwargs)


@pytest.mark.parametrize("kappa", [1.0, 10.0])
def test_lambda_star_has_a_closed_form(kappa):
    # J_z is conserved, so <J_z X>(t) = (2 g / kappa) Var(J_z) (1 - exp(-kappa t)) at any depth
    config = ten_atoms(kappa, k_max=2)
    growth = 1.0 - np.exp(-kappa * config.integrator.t_final)
    estimate = estimate_lambda_star(config)
    assert estimate["mean_jx0"] == pytest.approx(5.0)
    assert estimate["jz_x_max"] == pytest.approx(2.5 / kappa * growth, rel=1e-6)
    assert estimate["lambda_star"] == pytest.approx(growth, rel=1e-6)


def test_quadrature_stays_zero_while_correlations_build_up():
    series = {}
    for kappa in (1.0, 10.0):
        data = ten_atoms(kappa, k_max=4).model_dump(mode="json")
        data["outputs"] = ["xi2", "quadrature", "jz_x"]
        run = feedback_master_equation(load_config(data))
        assert np.max(np.abs(run.series["quadrature.0"])) < 1e-9
        expected = 2.5 / kappa * (1.0 - np.exp(-kappa * run.times))
        assert np.allclose(run.series["jz_x"], expected, atol=1e-7)
        series[kappa] = run
    late = series[1.0].times >= 0.1
    assert np.all(series[1.0].series["jz_x"][late] > series[10.0].series["jz_x"][late])


@pytest.mark.slow
def test_good_cavity_scan_has_one_positive_minimum():
    scan = lambda_scan(ten_atoms(1.0), np.round(np.arange(0.1, 0.61, 0.01), 10))
    minima = locate_minima(scan)
    best = minima.loc[minima["xi2_min"].idxmin()]
    assert not best["boundary"]
    assert best["lambda"] == pytest.approx(0.31, abs=0.03)
    assert best["xi2_min"] < 0.75


@pytest.mark.slow
def test_bad_cavity_optimum_sits_near_the_adiabatic_estimate():
    config = ten_atoms(10.0)
    scan = lambda_scan(config, np.round(np.arange(0.5, 1.51, 0.05), 10))
    minima = locate_minima(scan)
    best = minima.loc[minima["xi2_min"].idxmin()]
    assert not best["boundary"]
    assert abs(best["lambda"] - estimate_lambda_star(config)["lambda_star"]) < 0.3
    assert 1.2 <= best["t_min"] <= 1.9
    assert best["xi2_min"] < 0.72


@pytest.mark.slow
def test_switching_sign_outlasts_constant_feedback():
    config = ten_atoms(1.0)
    switched = switching_protocol(config, 0.31, -0.22, 1.6, 4.66)
    constant = feedback_master_equation(with_constant_lambda(config, 0.31))
    window = (switched.times >= 2.0) & (switched.times <= 5.0)
    assert np.all(switched.series["xi2"][window] < constant.series["xi2"][window])
    early = switched.times <= 1.6
    assert np.allclose(switched.series["xi2"][early], constant.series["xi2"][early], atol=1e-8)
