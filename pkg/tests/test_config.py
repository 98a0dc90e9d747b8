"""Config-file parsing."""

import pytest

from jointnet import ConfigError, parse_config_text
from jointnet.kvio import format_kv, parse_kv


class TestKvLines:
    def test_comments_and_blanks_ignored(self):
        values = parse_kv("# header\n\nlr = 0.1  # inline\n")
        assert values == {"lr": "0.1"}

    def test_duplicate_key_rejected_with_line(self):
        with pytest.raises(ConfigError, match="2: duplicate key 'a'"):
            parse_kv("a = 1\na = 2\n")

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_kv("just words\n")

    def test_format_round_trips(self):
        pairs = [("alpha", 1), ("beta", "x y")]
        assert parse_kv(format_kv(pairs)) == {"alpha": "1", "beta": "x y"}


class TestParseConfig:
    def test_empty_text_gives_defaults(self):
        run = parse_config_text("")
        assert run.n_stages == 2
        assert run.phi == 0.5
        assert run.mode == "joint"

    def test_values_applied(self):
        run = parse_config_text("epochs = 7\nphi = 0.25\nmode = backbone\n")
        assert (run.epochs, run.phi, run.mode) == (7, 0.25, "backbone")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key 'momentum'"):
            parse_config_text("momentum = 0.9\n")

    def test_type_error_names_key(self):
        with pytest.raises(ConfigError, match="'epochs' needs a int"):
            parse_config_text("epochs = soon\n")

    def test_cross_field_validation_runs(self):
        with pytest.raises(ConfigError, match="input_size"):
            parse_config_text("n_stages = 3\ninput_size = 20\n")

    def test_pairs_resolve_floats_via_repr(self):
        pairs = dict(parse_config_text("lr = 0.0001\n").pairs())
        assert pairs["lr"] == "0.0001"
        assert pairs["epochs"] == 30
