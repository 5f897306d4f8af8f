# SPDX-License-Identifier: MIT

import pytest

from effmaster.core.core_basics import ConfigError
from effmaster.utils.config import (
    Config,
    format_float,
    parse_state_spec,
    parse_text,
    resolve_config_value,
)

SAMPLE = """
# comment line
model.name = dicke
model.atoms = 2
model.g = 0.05   # trailing comment
state.field = fock 0
state.atoms = spin_coherent 1.5 0
evolve.observables = n0, s3_1
sweep.g = 0.02, 0.05
flags.apply_rwa = yes
flags.vacuum_reduction = field
"""


class TestParsing:
    def test_flat_keys(self):
        entries = parse_text(SAMPLE)
        assert entries["model.g"] == "0.05"
        assert entries["state.atoms"] == "spin_coherent 1.5 0"
        assert len(entries) == 9

    @pytest.mark.parametrize(
        "text, message",
        [
            ("model.name dicke", "expected 'key = value'"),
            ("name = dicke", "unknown key"),
            ("physics.g = 1", "unknown key"),
            ("model.g = 1\nmodel.g = 2", "duplicate key"),
        ],
    )
    def test_malformed_text(self, text, message):
        with pytest.raises(ConfigError, match=message):
            parse_text(text)

    def test_typed_sections(self):
        run = Config.from_text(SAMPLE).run
        assert run.model.name == "dicke"
        assert run.model.preset_kwargs() == {"atoms": 2, "g": 0.05}
        assert isinstance(run.model.preset_kwargs()["atoms"], int)
        assert run.evolve.observables == ["n0", "s3_1"]
        assert run.sweep.g == [0.02, 0.05]
        assert run.flags.apply_rwa is True
        assert run.flags.vacuum_reduction == "field"
        assert run.state.factors["atoms"] == "spin_coherent 1.5 0"

    @pytest.mark.parametrize(
        "text",
        [
            "model.name = jaynes",
            "model.g = strong",
            "flags.apply_rwa = maybe",
            "flags.truncation_order = 3",
            "flags.truncation_order = two",
            "flags.frame = lab",
            "evolve.dt = -0.1",
            "evolve.samples = 1",
            "evolve.unknown = 1",
            "state.a = squeezed 0.3",
            "state.a = coherent",
        ],
    )
    def test_invalid_values(self, text):
        with pytest.raises(ConfigError):
            Config.from_text(text)

    def test_none_values(self):
        flags = Config.from_text("flags.vacuum_reduction = none\nflags.support_tol = None").run.flags
        assert flags.vacuum_reduction is None
        assert flags.support_tol is None


class TestStateSpecs:
    def test_known_kinds(self):
        assert parse_state_spec("coherent 1.0") == ("coherent", [1.0])
        assert parse_state_spec("spin_coherent 0.5 1") == ("spin_coherent", [0.5, 1.0])

    def test_wrong_arity_and_values(self):
        with pytest.raises(ConfigError):
            parse_state_spec("fock 1 2")
        with pytest.raises(ConfigError):
            parse_state_spec("fock one")
        with pytest.raises(ConfigError):
            parse_state_spec("")


class TestCanonicalForm:
    def test_defaults_are_listed(self):
        flat = Config.from_text("").flat()
        assert flat["model.name"] == "coupled_oscillators"
        assert flat["flags.frame"] == "detuning"
        assert flat["flags.apply_rwa"] == "false"
        assert flat["flags.vacuum_reduction"] == "none"
        assert flat["evolve.dt"] == "0.01"

    def test_round_trip(self):
        config = Config.from_text(SAMPLE)
        again = Config.from_text(config.canonical())
        assert again.canonical() == config.canonical()
        keys = [line.split(" = ", 1)[0] for line in config.canonical().splitlines()]
        assert keys == sorted(keys)

    def test_equivalent_spellings_agree(self):
        one = Config.from_text("model.g = 0.050\nstate.a = coherent 1")
        two = Config.from_text("model.g=5e-2\nstate.a =   coherent   1.0")
        assert one.canonical() == two.canonical()

    def test_float_precision(self):
        assert format_float(0.1) == "0.10000000000000001"
        assert format_float(2) == "2"


class TestOverrides:
    def test_with_overrides(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text(SAMPLE)
        config = Config(path)
        changed = config.with_overrides(**{"model.g": "0.1", "outputs.dir": "elsewhere"})
        assert changed.run.model.parameters["g"] == 0.1
        assert changed.run.outputs.dir == "elsewhere"
        assert changed.config_file == str(path)
        assert config.run.model.parameters["g"] == 0.05

    def test_missing_file_falls_back_to_defaults(self, tmp_path, capsys):
        config = Config(tmp_path / "absent.conf")
        assert config.run.model.name == "coupled_oscillators"
        assert "not found" in capsys.readouterr().out

    def test_resolution_priority(self, monkeypatch):
        monkeypatch.delenv("EFFMASTER_OUT", raising=False)
        assert resolve_config_value("cli", "file", "EFFMASTER_OUT") == "cli"
        assert resolve_config_value(None, "file", "EFFMASTER_OUT") == "file"
        monkeypatch.setenv("EFFMASTER_OUT", "env")
        assert resolve_config_value(None, "file", "EFFMASTER_OUT") == "env"
        assert resolve_config_value("cli", "file", "EFFMASTER_OUT") == "cli"
        assert resolve_config_value(None, None) is None
