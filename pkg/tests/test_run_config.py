import copy

import numpy as np
import pytest

from analysis.converter_models import Scheme
from analysis.run_config import SweepAxis, load_run_config, run_config_from_dict
from utils.errors import ConfigError
from utils.settings import Settings


def _field_error(doc):
    with pytest.raises(ConfigError) as excinfo:
        run_config_from_dict(doc)
    return excinfo.value.field


def test_valid_document(stable_config):
    doc = dict(stable_config, axis="kp:1:20:5", hb={"K": 50}, simulation={"cycles": 100}, duty=0.3)
    config = run_config_from_dict(doc, Settings(delta=2e-3))
    assert config.scheme is Scheme.PVMC
    assert config.compensator.delta == 2e-3
    assert config.hb.K == 50
    assert config.cycles == 100
    assert config.duty == 0.3
    assert config.axis.values == pytest.approx(np.linspace(1.0, 20.0, 5))


def test_defaults_come_from_settings(stable_config):
    config = run_config_from_dict(stable_config, Settings(hb_harmonics=77, period_tol=1e-7))
    assert config.hb.K == 77
    assert config.period_tol == 1e-7
    assert config.fmt == "csv"


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d.pop("scheme"), "scheme"),
    (lambda d: d.update(scheme="PCMC"), "scheme"),
    (lambda d: d["power_stage"].pop("L"), "power_stage.L"),
    (lambda d: d["power_stage"].update(Lx=1.0), "power_stage.Lx"),
    (lambda d: d["power_stage"].update(C="big"), "power_stage.C"),
    (lambda d: d["power_stage"].update(R=-1.0), "power_stage"),
    (lambda d: d["compensator"].pop("kp"), "compensator.kp"),
    (lambda d: d["compensator"].update(kp=0.0), "compensator.kp"),
    (lambda d: d.update(axis="kp:1:20"), "axis"),
    (lambda d: d.update(axis="speed:1:2:3"), "axis"),
    (lambda d: d.update(hb={"K": 0}), "hb.K"),
    (lambda d: d.update(simulation={"cycles": 0}), "simulation.cycles"),
    (lambda d: d.update(simulation={"x_init": [1.0, "a"]}), "simulation.x_init[1]"),
    (lambda d: d.update(duty=1.2), "duty"),
    (lambda d: d.update(format="xml"), "format"),
    (lambda d: d.update(colour="red"), "colour"),
])
def test_field_paths(stable_config, mutate, field):
    doc = copy.deepcopy(stable_config)
    mutate(doc)
    assert _field_error(doc) == field


def test_sweep_axis_parse():
    axis = SweepAxis.parse("D:0.05:0.95:181")
    assert (axis.name, axis.lo, axis.hi, axis.points) == ("D", 0.05, 0.95, 181)
    assert str(axis) == "D:0.05:0.95:181"


@pytest.mark.parametrize("text", ["D:0.9:0.1:10", "D:0:1:1", "D:a:1:5", ":0:1:5", "D:0:inf:5"])
def test_sweep_axis_rejects(text):
    with pytest.raises(ConfigError):
        SweepAxis.parse(text, "--axis")


def test_with_parameter(stable_config):
    config = run_config_from_dict(stable_config)
    assert config.with_parameter("kp", 12.0).compensator.kp == 12.0
    assert config.with_parameter("vs", 40.0).power_stage.vs == 40.0
    with pytest.raises(ConfigError):
        config.with_parameter("speed", 1.0)


def test_load_from_file(config_file, stable_config):
    config = load_run_config(config_file(stable_config))
    assert config.power_stage.R == 2.0


def test_load_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        load_run_config(str(path))
    assert excinfo.value.field == "--config"
    assert "line 1" in str(excinfo.value)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_run_config(str(tmp_path / "absent.json"))
