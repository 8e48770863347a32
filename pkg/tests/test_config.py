"""Run configuration parsing: defaults, files, overrides, validation."""

import pytest

from mixqa.config import ConfigError, RunConfig, apply_settings, load_run_config, parse_config_file


class TestDefaults:
    def test_reference_settings(self):
        config = RunConfig()
        assert config.d_w == 100
        assert config.hidden == 128
        assert config.M == 10
        assert config.n_e == 600
        assert config.batch_size == 32
        assert config.min_count == 10
        assert config.neg_ratio == 10
        assert config.exponent == 4

    def test_derived_configs_carry_values(self):
        config = RunConfig(hidden=12, seed=4)
        assert config.reader_config().hidden == 12
        assert config.ranker_config().hidden == 12
        assert config.reader_config().seed == 4


class TestParsing:
    def test_file_then_flags(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("# comment\nhidden = 32\nseed = 9\n\nvariant = av\n")
        config = load_run_config(str(f), {"seed": "11"})
        assert config.hidden == 32
        assert config.variant == "av"
        assert config.seed == 11  # flag wins

    def test_unknown_key_lists_valid_keys(self):
        with pytest.raises(ConfigError, match="valid keys.*anonymize"):
            apply_settings(RunConfig(), {"not_a_key": "1"})

    def test_bool_coercion(self):
        config = apply_settings(RunConfig(), {"anonymize": "false", "shuffle_articles": "1"})
        assert config.anonymize is False
        assert config.shuffle_articles is True

    def test_bad_bool_rejected(self):
        with pytest.raises(ConfigError, match="boolean"):
            apply_settings(RunConfig(), {"anonymize": "maybe"})

    def test_bad_int_rejected(self):
        with pytest.raises(ConfigError, match="hidden"):
            apply_settings(RunConfig(), {"hidden": "wide"})

    def test_float_coercion(self):
        config = apply_settings(RunConfig(), {"lr": "3e-3"})
        assert config.lr == pytest.approx(3e-3)

    def test_missing_file_rejected(self):
        with pytest.raises(ConfigError, match="not found"):
            parse_config_file("/nonexistent/path.cfg")

    def test_malformed_line_rejected(self, tmp_path):
        f = tmp_path / "bad.cfg"
        f.write_text("hidden 32\n")
        with pytest.raises(ConfigError, match="key = value"):
            parse_config_file(f)
