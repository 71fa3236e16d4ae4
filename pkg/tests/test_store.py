"""
Tests for the JSON-file store and the persisted RP account store
"""

import pytest

from app.services.store import JsonStore, StoredAccountStore
from privsso.core.errors import ConfigError
from privsso.core.protocol import AccountRecord, AccountStore


def test_memory_store():
    store = JsonStore(None)
    store.put("users", "alice", {"n": 1})
    assert store.get("users", "alice") == {"n": 1}
    assert store.get("users", "bob", "fallback") == "fallback"
    assert store.count("users") == 1 and store.count("other") == 0
    assert dict(store.items("users")) == {"alice": {"n": 1}}
    assert store.delete("users", "alice") and not store.delete("users", "alice")
    assert store.lock("users", "alice") is store.lock("users", "alice")


def test_file_store_persists(tmp_path):
    path = tmp_path / "state" / "store.json"
    store = JsonStore(str(path))
    store.put("keys", "k1", "abcd")
    store.put("keys", "k2", "ef01")
    store.delete("keys", "k2")
    reloaded = JsonStore(str(path))
    assert dict(reloaded.items("keys")) == {"k1": "abcd"}
    assert sorted(p.name for p in path.parent.iterdir()) == ["store.json"]


def test_corrupt_store_refused(tmp_path):
    path = tmp_path / "store.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        JsonStore(str(path))


def test_account_store_lookup():
    accounts = AccountStore()
    accounts.put(AccountRecord("acct-1", "zeta-1"))
    assert accounts.get("zeta-1").account_id == "acct-1"
    assert accounts.by_account_id("acct-1").zeta == "zeta-1"
    assert accounts.by_account_id("acct-2") is None
    accounts.blocklist("zeta-1", 100.0)
    assert accounts.is_blocklisted("zeta-1") and not accounts.is_blocklisted("zeta-2")
    accounts.delete("zeta-1")
    assert len(accounts) == 0


def test_account_id_index_follows_moves():
    accounts = AccountStore()
    accounts.put(AccountRecord("acct-1", "zeta-1"))
    accounts.put(AccountRecord("acct-1", "zeta-2"))
    accounts.delete("zeta-1")
    assert accounts.by_account_id("acct-1").zeta == "zeta-2"
    assert accounts._by_id == {"acct-1": "zeta-2"}
    accounts.delete("zeta-2")
    assert accounts.by_account_id("acct-1") is None and accounts._by_id == {}


def test_stored_accounts_survive_restart(tmp_path):
    path = str(tmp_path / "rp.json")
    accounts = StoredAccountStore(JsonStore(path))
    record = AccountRecord("acct-1", "aa" * 48, ["bb" * 48], None, {"tp": 19790}, "idp.local", 1.0, 2.0,
                           ("bb" * 48, 2.0))
    accounts.put(record)
    accounts.put(AccountRecord("acct-2", "cc" * 48))
    accounts.delete("cc" * 48)
    accounts.blocklist("dd" * 48, 5.0)

    restarted = StoredAccountStore(JsonStore(path))
    assert len(restarted) == 1
    assert restarted.get("aa" * 48) == record
    assert restarted.by_account_id("acct-1") == record and restarted.by_account_id("acct-2") is None
    assert restarted.is_blocklisted("dd" * 48)


def test_account_record_round_trip():
    record = AccountRecord("acct", "z", ["d1", "d2"], "00ff", {"tp": 1, "name": "Alice"}, "idp", 1.5, 2.5,
                           ("d1", 2.5))
    assert AccountRecord.from_dict(record.to_dict()) == record
    assert AccountRecord.from_dict(AccountRecord("a", "z").to_dict()).pending_factor is None
