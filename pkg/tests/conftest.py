import json

import pytest

from analysis.converter_models import CompensatorParams, PowerStageParams, Scheme, build_model, inputs
from presets.design_examples import DesignExamples


@pytest.fixture
def pvmc_stage():
    """1 MHz proportional VMC buck without ESR."""
    return PowerStageParams(**DesignExamples.EX1_POWER_STAGE)


@pytest.fixture
def pvmc_comp():
    return CompensatorParams(scheme=Scheme.PVMC, kp=DesignExamples.EX1_COMPENSATOR["kp"])


@pytest.fixture
def stable_stage():
    """Proportional VMC buck at T = 400 us, R = 2, vs = 50 (a stable operating point)."""
    return PowerStageParams(**DesignExamples.EX6_POWER_STAGE).with_values(
        R=DesignExamples.EX11_LOAD, vs=DesignExamples.EX11_VS
    )


@pytest.fixture
def stable_comp():
    return CompensatorParams(scheme=Scheme.PVMC, kp=DesignExamples.EX6_COMPENSATOR["kp"])


@pytest.fixture
def stable_model(stable_stage, stable_comp):
    return build_model(stable_stage, stable_comp), inputs(stable_stage.vs, stable_stage.vr)


@pytest.fixture
def cmc_stage():
    """300 kHz CMC buck with the design ramp ma = vs D/(2L) at D = 0.6."""
    ps = PowerStageParams(**DesignExamples.EX2_POWER_STAGE)
    ma = ps.vs * DesignExamples.EX2_DESIGN_DUTY / (2.0 * ps.L)
    return ps.with_values(Vh=ma * ps.T)


@pytest.fixture
def type3_stage():
    return PowerStageParams(**DesignExamples.EX4_POWER_STAGE)


@pytest.fixture
def config_file(tmp_path):
    """Write a JSON run configuration and return its path."""
    def write(doc, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return str(path)

    return write


@pytest.fixture
def stable_config():
    stage = dict(DesignExamples.EX6_POWER_STAGE, R=DesignExamples.EX11_LOAD, vs=DesignExamples.EX11_VS)
    return {"scheme": "PVMC", "power_stage": stage, "compensator": {"kp": 8.4}}
