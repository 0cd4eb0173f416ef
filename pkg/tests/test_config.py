import json
import math

import pytest

from heatmedium.config import ConfigError, RunConfig, from_dict, parse_config


def test_minimal_config_fills_defaults():
    cfg = parse_config('{"domain": {"lo": [0, 0, 0], "hi": [1, 1, 1]}}')
    assert cfg.kappa == 0.5 and cfg.a == 0.01 and cfg.seeds == [0]
    assert cfg.fields["c"] == {"kind": "constant", "value": 4 * math.pi}
    assert cfg.box.volume == 1.0


def test_kappa_message():
    with pytest.raises(ConfigError) as info:
        parse_config('{"kappa": 1.5}')
    assert "kappa must lie in (0,1)" in info.value.errors


def test_all_errors_reported():
    text = json.dumps({"kappa": 0, "b": -1, "grid": 0, "lambdas": [0.0], "bogus": 1,
                       "fields": {"N": {"kind": "constant", "value": -1}}})
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    errs = info.value.errors
    assert len(errs) == 6
    assert any("bogus" in e for e in errs)
    assert any(e.startswith("fields.N") for e in errs)


def test_syntax_error_position():
    with pytest.raises(ConfigError, match="line 3, column 7"):
        parse_config('{\n  "a": 0.01,\n  "b" 0.2\n}')


def test_round_trip():
    text = json.dumps({
        "fields": {"h": {"kind": "gaussian", "center": [0.5, 0.5, 0.5], "width": 0.25, "amplitude": 1}},
        "a_schedule": [0.04, 0.02], "seeds": [1, 2], "lambdas": [1, 0.5],
    })
    cfg = parse_config(text)
    again = parse_config(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()
    assert again.digest() == cfg.digest()


def test_unknown_field_keys_rejected():
    with pytest.raises(ConfigError, match="unknown key 'sigma'"):
        from_dict({"fields": {"f": {"kind": "constant", "value": 1, "sigma": 2}}})


def test_regime_checked_before_dispatch():
    with pytest.raises(ConfigError, match="must exceed the separation"):
        from_dict({"a": 0.04, "b": 0.1})
    with pytest.raises(ConfigError, match="must exceed 2a"):
        from_dict({"a": 0.04, "fields": {"N": {"kind": "constant", "value": 5.0}}})
    # explicit particle lists skip the sampling rule
    assert from_dict({"a": 0.04, "b": 0.1, "particles": [[0.5, 0.5, 0.5]]}).b == 0.1


def test_schedule_must_decrease():
    with pytest.raises(ConfigError, match="decreasing"):
        from_dict({"a_schedule": [0.01, 0.02]})


def test_defaults_object():
    assert RunConfig().output_dir == "out"
