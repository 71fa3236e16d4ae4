"""
Tests for the JSON configuration layer and the service settings
"""

import json

import pytest

from app.core.config import Settings
from privsso.core.errors import ConfigError
from privsso.utils.config_manager import DEFAULT_CONFIG, ConfigManager


def _write(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_defaults_without_file(tmp_path):
    config = ConfigManager(str(tmp_path / "missing.json"))
    assert config.config == DEFAULT_CONFIG
    assert not (tmp_path / "missing.json").exists()
    ConfigManager(str(tmp_path / "created.json"), create=True)
    assert json.loads((tmp_path / "created.json").read_text(encoding="utf-8")) == DEFAULT_CONFIG


def test_user_values_merge_over_defaults(tmp_path):
    path = _write(tmp_path / "c.json", {"rp_settings": {"require_2fa": True}, "extra": {"k": 1}})
    config = ConfigManager(path)
    assert config.get("rp_settings.require_2fa") is True
    assert config.get("rp_settings.nonce_ttl_seconds") == 120
    assert config.get("extra.k") == 1
    assert config.get("rp_settings.missing", "dflt") == "dflt"
    assert config.get("rp_settings.domain.deeper") is None


@pytest.mark.parametrize("override", [
    {"authority_settings": {"n_auth": 3, "threshold": 4}},
    {"authority_settings": {"threshold": 0}},
    {"idp_settings": {"validity_days": -1}},
    {"rp_settings": {"nonce_ttl_seconds": 0}},
    {"rp_settings": {"nonce_cache_max": 0}},
    {"idp_settings": {"attribute_catalog": {"height": "float"}}},
    {"idp_settings": {"attribute_catalog": {"gamma": "int"}}},
])
def test_invalid_settings_refused(tmp_path, override):
    with pytest.raises(ConfigError):
        ConfigManager(_write(tmp_path / "c.json", override))


def test_unreadable_files_refused(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        ConfigManager(str(broken))
    with pytest.raises(ConfigError):
        ConfigManager(_write(tmp_path / "list.json", [1, 2]))


def test_set_persists(tmp_path):
    path = str(tmp_path / "c.json")
    config = ConfigManager(path)
    assert config.set("bench_settings.seed", 7)
    assert ConfigManager(path).get("bench_settings.seed") == 7
    config.set("new_section.value", "x", persist=False)
    assert ConfigManager(path).get("new_section.value") is None


def test_typed_accessors():
    config = ConfigManager(None)
    assert config.authority_endpoints() == {1: "http://127.0.0.1:8101", 2: "http://127.0.0.1:8102",
                                            3: "http://127.0.0.1:8103"}
    assert config.trusted_idps() == {"idp.local": "http://127.0.0.1:8001"}
    assert config.attribute_catalog()["age"] == "int"
    assert config.seed_users() == []
    summary = config.summary()
    assert summary["authorities"] == "2-of-3"
    assert "admin_token" not in json.dumps(summary)


def test_printed_summary(capsys):
    ConfigManager(None).print_config_summary()
    out = capsys.readouterr().out
    assert "CONFIGURATION SUMMARY" in out
    assert "Authorities: 2-of-3" in out


def test_log_visibility():
    config = ConfigManager(None)
    assert config.should_show_log("progress")
    assert not config.should_show_log("protocol_details")
    config.set("logging_settings.log_level", "ERROR", persist=False)
    assert not config.should_show_log("warning")
    assert config.should_show_log("error")


def test_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("PRIVSSO_ROLE", "rp")
    monkeypatch.setenv("PRIVSSO_ADMIN_TOKEN", "from-env")
    monkeypatch.setenv("PRIVSSO_DATA_DIR", str(tmp_path))
    settings = Settings()
    assert settings.role == "rp" and settings.admin_token == "from-env"
    assert settings.data_path("rp_store.json") == str(tmp_path / "rp_store.json")
    assert Settings(in_memory=True).data_path("rp_store.json") is None
