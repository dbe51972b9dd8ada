import json
from pathlib import Path

import pytest

from app.core.errors import ConfigError
from app.experiments.builders import with_overrides
from app.experiments.config import field_path, load_config, parse_config

MODELS = Path(__file__).resolve().parent.parent / "app" / "models"
BUNDLED = ["jc_fig2.json", "jc_fig3.json", "spin_squeezing_good.json", "spin_squeezing_bad.json", "dicke_clusters.json"]


def jc_data(**changes):
    data = {
        "name": "jc",
        "model": {"kind": "jaynes_cummings", "omega": 1.0, "epsilon": 0.0},
        "modes": [{"g": 2.0, "delta": 1.0, "kappa": 3.0}],
        "integrator": {"dt": 1e-3, "t_final": 1.0},
    }
    data.update(changes)
    return data


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_configs_are_valid(name):
    config = parse_config(MODELS / name)
    assert config.name == Path(name).stem


def test_defaults():
    config = load_config(jc_data())
    assert config.truncation.k_max == 4
    assert config.conventions.heterodyne_sign == -1
    assert config.conventions.redfield_convention == "closure"
    assert config.ensemble.trajectories is None


@pytest.mark.parametrize(
    "data, path",
    [
        (jc_data(modes=[{"g": 2.0, "kappa": -3.0}]), "modes[0].kappa"),
        (jc_data(modes=[{"g": 2.0, "kappa": 3.0, "colour": "red"}]), "modes[0].colour"),
        (jc_data(model={"kind": "jaynes_cummings", "omega": -1.0}), "model.omega"),
        (jc_data(integrator={"dt": 0.0, "t_final": 1.0}), "integrator.dt"),
        (jc_data(outputs=["purity", "temperature"]), "outputs"),
        (jc_data(modes=[{"g": 2.0, "kappa": 3.0, "detection": "bolometer"}]), "modes[0].detection"),
    ],
)
def test_errors_name_the_field(data, path):
    with pytest.raises(ConfigError) as info:
        load_config(data)
    assert info.value.field_path == path
    assert str(info.value).startswith(f"{path}: ")


def test_cross_field_rules():
    with pytest.raises(ConfigError, match="modes\\[0\\].g"):
        load_config(jc_data(modes=[{"kappa": 3.0}]))
    with pytest.raises(ConfigError, match="exactly one cavity mode"):
        load_config(jc_data(modes=[{"g": 1.0, "kappa": 1.0}, {"g": 1.0, "kappa": 1.0}]))
    with pytest.raises(ConfigError, match="spin-squeezing"):
        load_config(jc_data(feedback={"dynamic": True}))


def test_dicke_coupling_matrix_shape():
    data = {
        "name": "dicke",
        "model": {"kind": "dicke_clusters", "n_clusters": 3, "n_atoms": 2, "g_matrix": [[1.0, 0.0], [0.5, 0.5]]},
        "modes": [{"kappa": 2.0}, {"kappa": 2.0}],
        "integrator": {"t_final": 1.0},
    }
    with pytest.raises(ConfigError, match="g_matrix"):
        load_config(data)


def test_feedback_needs_one_rule():
    data = {
        "name": "spin",
        "model": {"kind": "spin_squeezing", "n_atoms": 4},
        "modes": [{"g": 0.5, "kappa": 1.0}],
        "integrator": {"t_final": 1.0},
        "feedback": {"dynamic": True, "schedule": {"starts": [0.0], "values": [0.2]}},
    }
    with pytest.raises(ConfigError, match="exactly one"):
        load_config(data)
    data["feedback"] = {"schedule": {"starts": [0.0, 2.0, 1.0], "values": [0.2, -0.1, 0.2]}}
    with pytest.raises(ConfigError, match="ascending"):
        load_config(data)


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse_config(tmp_path / "missing.json")
    assert info.value.field_path == "<file>"
    broken = tmp_path / "broken.json"
    broken.write_text('{"name": ')
    with pytest.raises(ConfigError, match="malformed JSON"):
        parse_config(broken)


def test_overrides_revalidate():
    config = load_config(jc_data())
    changed = with_overrides(config, seed=7, trajectories=12, dt=5e-4, k_max=6)
    assert changed.ensemble.master_seed == 7
    assert changed.ensemble.trajectories == 12
    assert changed.integrator.dt == 5e-4
    assert changed.truncation.k_max == 6
    assert config.truncation.k_max == 4
    with pytest.raises(ConfigError) as info:
        with_overrides(config, dt=-1.0)
    assert info.value.field_path == "integrator.dt"


def test_field_path():
    assert field_path(("modes", 0, "kappa")) == "modes[0].kappa"
    assert field_path(()) == "<root>"
    assert json.loads(json.dumps(field_path(("a", 1, 2)))) == "a[1][2]"
