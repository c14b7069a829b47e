import json
import os

import pytest

import config_object
from errors import ConfigError, ConfigParseError, ValidationError


def document(**values):
    base = {"command": "besov-norm", "s": 0.5}
    base.update(values)
    return json.dumps(base, indent="  ")


class Test_config_class:
    class Test_init:
        def test_defaults(self, mocker):
            mocked_load_dotenv = mocker.patch("config_object.load_dotenv")
            config = config_object.parse_config(document())
            mocked_load_dotenv.assert_called_once()
            assert config.command == "besov-norm"
            assert config.n == 1
            assert config.p == 2.0
            assert config.seed == 0
            assert config.samples == 100000
            assert config.weight == {"family": "constant", "value": 1.0}
            assert config.k is None
            assert config.output_format == "json"
            assert config.output_path is None

        def test_load_config_from_file(self, fs, mocker):
            mocker.patch("config_object.load_dotenv")
            fs.create_file("/config.json", contents=document(n=2, seed=5, p=3))
            config = config_object.load_config("/config.json")
            assert config.n == 2
            assert config.seed == 5
            assert config.p == 3.0

        def test_echo_is_plain_json(self, mocker):
            mocker.patch("config_object.load_dotenv")
            config = config_object.parse_config(document(k=2))
            assert json.loads(json.dumps(config.echo())) == config.echo()
            assert config.echo()["k"] == 2

    class Test_overrides:
        def test_command_line_wins(self, mocker):
            mocker.patch("config_object.load_dotenv")
            config = config_object.parse_config(document(seed=1, samples=10))
            config = config.with_overrides(seed=9, samples=20, out="/r.csv", output_format="csv")
            assert config.seed == 9
            assert config.samples == 20
            assert config.output_path == "/r.csv"
            assert config.output_format == "csv"

        def test_overrides_are_validated(self, mocker):
            mocker.patch("config_object.load_dotenv")
            config = config_object.parse_config(document())
            with pytest.raises(ValidationError):
                config.with_overrides(samples=0)

    class Test_presets:
        def test_preset_values(self, mocker):
            mocker.patch("config_object.load_dotenv")
            config = config_object.parse_config(
                json.dumps({"command": "weight-certify", "preset": "remark-4.3-n1"}))
            assert config.s == 0.4
            assert config.weight["family"] == "phi"

        def test_document_overrides_preset(self, mocker):
            mocker.patch("config_object.load_dotenv")
            config = config_object.parse_config(
                json.dumps({"command": "weight-certify", "preset": "remark-4.3-n1", "p": 3}))
            assert config.p == 3.0

        def test_induced_preset(self, mocker):
            mocker.patch("config_object.load_dotenv")
            config = config_object.parse_config(
                json.dumps({"command": "weight-certify", "preset": "remark-4.3-n1-induced"}))
            assert config.weight["family"] == "induced"

        def test_unknown_preset(self, mocker):
            mocker.patch("config_object.load_dotenv")
            with pytest.raises(ValidationError):
                config_object.parse_config(json.dumps({"command": "geom-check", "preset": "x"}))


class Test_validate:
    def test_p_equal_to_one(self):
        with pytest.raises(ValidationError) as error:
            config_object.parse_config(document(p=1))
        assert "p > 1" in str(error.value)

    def test_k_not_above_s(self):
        with pytest.raises(ValidationError) as error:
            config_object.parse_config(document(s=1.5, k=1))
        assert "k > s" in str(error.value)

    def test_s_required(self):
        with pytest.raises(ValidationError):
            config_object.parse_config(json.dumps({"command": "besov-norm"}))

    def test_s_not_required_for_geometry(self):
        config = config_object.parse_config(json.dumps({"command": "geom-check"}))
        assert config.s is None

    def test_measure_required_for_carleson(self):
        with pytest.raises(ValidationError):
            config_object.parse_config(document(command="carleson-test"))

    def test_s_positive_for_carleson(self):
        with pytest.raises(ValidationError):
            config_object.parse_config(document(command="carleson-test", s=0.0,
                                                measure="mu.csv"))

    def test_unknown_command(self):
        with pytest.raises(ValidationError):
            config_object.parse_config(document(command="plot"))

    def test_unknown_key(self):
        with pytest.raises(ValidationError) as error:
            config_object.parse_config(document(colour="red"))
        assert "colour" in str(error.value)

    def test_non_integer_dimension(self):
        with pytest.raises(ValidationError):
            config_object.parse_config(document(n=1.5))

    def test_boolean_is_not_a_number(self):
        with pytest.raises(ValidationError):
            config_object.parse_config(document(p=True))

    def test_seed_range(self):
        with pytest.raises(ValidationError):
            config_object.parse_config(document(seed=-1))

    def test_output_format(self):
        with pytest.raises(ValidationError):
            config_object.parse_config(document(output={"format": "xml"}))

    def test_weight_must_be_an_object(self):
        with pytest.raises(ValidationError):
            config_object.parse_config(document(weight="constant"))


class Test_parse_errors:
    def test_reports_line_and_column(self):
        with pytest.raises(ConfigParseError) as error:
            config_object.parse_config('{\n  "command": "geom-check",\n  "n": ,\n}')
        assert error.value.line == 3
        assert error.value.column == 8
        assert "line 3" in str(error.value)

    def test_top_level_must_be_an_object(self):
        with pytest.raises(ConfigParseError):
            config_object.parse_config("[1, 2]")


class Test_environment:
    def test_workers_default(self, mocker):
        mocker.patch.dict(os.environ, {}, clear=True)
        assert config_object.env_workers() >= 1

    def test_workers_from_environment(self, mocker):
        mocker.patch.dict(os.environ, {"BESOV_WORKERS": "3"})
        assert config_object.env_workers() == 3

    @pytest.mark.parametrize("raw", ["zero", "0", "-2"])
    def test_invalid_workers(self, mocker, raw):
        mocker.patch.dict(os.environ, {"BESOV_WORKERS": raw})
        with pytest.raises(ConfigError):
            config_object.env_workers()

    def test_progress_flag(self, mocker):
        mocker.patch.dict(os.environ, {"BESOV_PROGRESS": "1"})
        assert config_object.env_progress()

    def test_log_level(self, mocker):
        mocker.patch.dict(os.environ, {"BESOV_LOG_LEVEL": "debug"})
        assert config_object.env_log_level() == "DEBUG"
