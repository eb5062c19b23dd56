from __future__ import annotations

import json

import pytest

from segqc.config import load_config
from segqc.dataset import QualityLabel
from segqc.errors import ConfigError


class TestDefaults:
    def test_defaults_give_mock_provider(self):
        cfg = load_config(env={})
        assert cfg.provider_kind == "mock"
        assert cfg.provider.model_id == "mock-hcr"
        assert cfg.positive_class is QualityLabel.REJECT
        assert cfg.ensemble_k is None

    def test_paths_nonempty(self):
        cfg = load_config(env={})
        assert cfg.paths.manifest and cfg.paths.cache_dir and cfg.paths.out_dir


class TestPrecedence:
    def test_flag_beats_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"provider": {"kind": "live", "model_id": "from-file"}}))
        cfg = load_config(path, env={}, overrides={"provider.model_id": "from-flag"})
        assert cfg.provider.model_id == "from-flag"
        assert cfg.provider_kind == "live"

    def test_env_beats_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"provider": {"model_id": "from-file"}}))
        cfg = load_config(path, env={"SEGQC_MODEL": "from-env"})
        assert cfg.provider.model_id == "from-env"

    def test_flag_beats_env(self, tmp_path):
        cfg = load_config(
            env={"SEGQC_MODEL": "from-env"}, overrides={"provider.model_id": "from-flag"}
        )
        assert cfg.provider.model_id == "from-flag"

    def test_file_beats_default(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"positive_class": "accept"}))
        assert load_config(path, env={}).positive_class is QualityLabel.ACCEPT

    def test_config_path_from_environment(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"paths": {"out_dir": "elsewhere"}}))
        cfg = load_config(env={"SEGQC_CONFIG": str(path)})
        assert cfg.paths.out_dir == "elsewhere"

    def test_none_overrides_are_ignored(self):
        cfg = load_config(env={}, overrides={"provider.model_id": None})
        assert cfg.provider.model_id == "mock-hcr"


class TestValidation:
    def test_ensemble_k_of_one_rejected(self):
        with pytest.raises(ConfigError) as exc:
            load_config(env={}, overrides={"ensemble_k": 1})
        assert "ensemble_k" in str(exc.value)

    def test_unknown_key_named(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"wat": 1}))
        with pytest.raises(ConfigError) as exc:
            load_config(path, env={})
        assert "wat" in str(exc.value)

    def test_api_key_in_file_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"provider": {"api_key": "oops"}}))
        with pytest.raises(ConfigError) as exc:
            load_config(path, env={})
        assert "environment" in str(exc.value)

    def test_bad_positive_class(self):
        with pytest.raises(ConfigError):
            load_config(env={}, overrides={"positive_class": "banana"})

    def test_bad_provider_kind(self):
        with pytest.raises(ConfigError):
            load_config(env={}, overrides={"provider.kind": "psychic"})

    def test_non_integer_ensemble(self):
        with pytest.raises(ConfigError):
            load_config(env={}, overrides={"ensemble_k": "two"})

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(path, env={})


class TestRedaction:
    def test_redacted_dict_never_contains_key_material(self, monkeypatch):
        monkeypatch.setenv("SEGQC_API_KEY", "supersecret")
        cfg = load_config(env={})
        text = json.dumps(cfg.redacted_dict())
        assert "supersecret" not in text
        assert "redacted" in text
