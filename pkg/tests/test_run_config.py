from pathlib import Path

import pytest

from src.config.run_config import load_config, parse_config
from src.storage.constants_store import CalibratedConstants, load_constants, save_constants
from src.utils.constants import Integrator, PotentialFamily
from src.utils.exceptions import ConfigError, StorageError

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"

MINIMAL = """
# smallest useful run
domain.m = 2
domain.n_per_axis = 16
domain.period = 1.0
potential.family = Smoothed
potential.b = 0.1
"""


def test_dotted_config_with_defaults():
    config = parse_config(MINIMAL)
    assert config.domain.n_per_axis == 16
    assert config.potential.family == PotentialFamily.SMOOTHED
    assert config.flow.integrator == Integrator.SPECTRAL_IMEX
    assert config.flow.dt == "adaptive:0.25"
    assert config.matrix.l == 2
    assert config.output.emit_snapshots
    spec = config.spec()
    assert spec.b == 0.1 and spec.L == 1


@pytest.mark.parametrize("extra, key", [
    ("potential.b = -1", "potential.b"),
    ("potential.L = 2", "potential.L"),
    ("domain.colour = 3", "domain.colour"),
    ("flow.t_end = 0", "flow.t_end"),
    ("matrix.winding = [1, 0, 0]", "matrix.winding"),
    ("analysis.rho = 0.5", "analysis.rho"),
])
def test_invalid_keys_are_named(extra, key):
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + extra + "\n")
    assert info.value.config_key == key


def test_missing_b_for_smoothed_family():
    text = MINIMAL.replace("potential.b = 0.1\n", "")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.config_key == "potential"


def test_malformed_lines():
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "not a pair\n")
    with pytest.raises(ConfigError):
        parse_config("{ broken json")


def test_dt_policy_is_normalized():
    config = parse_config(MINIMAL + "flow.dt = fixed:1e-3\n")
    assert config.flow.dt == "fixed:0.001"
    flow = config.flow.to_flow_config()
    assert flow.dt_policy.is_fixed
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "flow.dt = sometimes\n")
    assert info.value.config_key == "flow.dt"


@pytest.mark.parametrize("name", sorted(p.name for p in SCRIPTS.glob("*.json")))
def test_shipped_scenarios_parse(name):
    config = load_config(str(SCRIPTS / name))
    assert config.output.directory.endswith(name[:-len(".json")])


def test_resolved_round_trips():
    config = load_config(str(SCRIPTS / "higher_power_3d.json"))
    resolved = config.resolved()
    assert resolved["potential"]["L"] == 2
    assert resolved["flow"]["dt"] == "adaptive:0.25"
    assert parse_config(config.json()) == config


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.json"))


def test_constants_save_and_load(tmp_path):
    path = str(tmp_path / "nested" / "constants.json")
    constants = CalibratedConstants(moser_C1=2.5, eps_C=3.0)
    save_constants(constants, path)
    assert load_constants(path) == constants
    with pytest.raises(StorageError):
        load_constants(str(tmp_path / "absent.json"))


def test_constants_reject_bad_values(tmp_path):
    path = tmp_path / "constants.json"
    path.write_text('{"eps_C": 0.0}')
    with pytest.raises(ConfigError) as info:
        load_constants(str(path))
    assert info.value.config_key == "eps_C"
    path.write_text('{"unknown": 1.0}')
    with pytest.raises(ConfigError):
        load_constants(str(path))
