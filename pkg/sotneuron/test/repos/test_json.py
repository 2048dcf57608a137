from textwrap import dedent
from typing import Optional

import pytest
from pydantic import BaseModel

from sotneuron.exc import KeyFoundError
from sotneuron.repos import JSONDirectoryStore


class Summary(BaseModel):
    name: str
    final_state: str
    mz: Optional[float] = None


def test_filecontent(tmp_path):
    store = JSONDirectoryStore(path=tmp_path, model=Summary, kwds_json_dump={})

    store.add(Summary(name="switch", final_state="AP", mz=-0.9))
    content = (tmp_path / "switch.json").read_text(encoding="UTF-8")
    assert content == '{"name": "switch", "final_state": "AP", "mz": -0.9}'

def test_kwds_json(tmp_path):
    store = JSONDirectoryStore(path=tmp_path, model=Summary, kwds_json_dump={'indent': 4, 'sort_keys': True})
    store.add(Summary(name="switch", final_state="P"))

    content = (tmp_path / "switch.json").read_text(encoding="UTF-8")
    assert content == dedent('''
    {
        "final_state": "P",
        "mz": null,
        "name": "switch"
    }
    ''')[1:-1]
    assert store["switch"] == Summary(name="switch", final_state="P")

def test_insert_existing(tmp_path):
    store = JSONDirectoryStore(path=tmp_path)
    store.add({"name": "power", "P_clock": 7.225e-6})
    with pytest.raises(KeyFoundError):
        store.add({"name": "power", "P_clock": 0.0})
    assert store["power"] == {"name": "power", "P_clock": 7.225e-6}

def test_upsert(tmp_path):
    store = JSONDirectoryStore(path=tmp_path / "out")
    store.upsert({"name": "power", "P_clock": 0.0})
    store.upsert({"name": "power", "P_clock": 7.225e-6})
    assert store["power"]["P_clock"] == 7.225e-6
    assert "power" in store
    assert "energy" not in store

def test_missing_item(tmp_path):
    store = JSONDirectoryStore(path=tmp_path)
    with pytest.raises(KeyError):
        store["missing"]

def test_iterate(tmp_path):
    store = JSONDirectoryStore(path=tmp_path, model=Summary, id_field="final_state")
    store.add(Summary(name="b", final_state="P"))
    store.add(Summary(name="a", final_state="AP"))
    assert sorted(store.get_file_path(item.final_state).name for item in store) == ["AP.json", "P.json"]
    assert {item.name for item in store.all()} == {"a", "b"}
