import json
from pathlib import Path
from typing import Iterator

from sotneuron.base import BaseStore, Data, Item
from sotneuron.exc import KeyFoundError


class JSONDirectoryStore(BaseStore):
    """JSON directory store

    This store represents a directory which 
    contains JSON files. Each item represents a
    file and the ``id_field`` is the stem of the
    file.

    Parameters
    ----------
    path : Path-like
        Path to the directory
    id_field : str
        Key that names each item (file stem).
        By default "name"
    model : Type
        Class of an item in the store.
    kwds_json_load : dict
        Keyword arguments passed to ``json.load``. 
    kwds_json_dump : dict
        Keyword arguments passed to ``json.dump``.
    
    Examples
    --------
    .. code-block:: python

        store = JSONDirectoryStore(path="out")
        store.add({"name": "summary", "final_state": "AP"})
        store["summary"]
    """

    path: Path
    id_field: str = "name"
    kwds_json_load: dict = {}
    kwds_json_dump: dict = {"indent": 2}

    def __getitem__(self, id) -> Item:
        try:
            return self.data_to_item(self.read_file(id))
        except FileNotFoundError as exc:
            raise KeyError(f"Item {id} not found.") from exc

    def __contains__(self, id) -> bool:
        return self.get_file_path(id).is_file()

    def insert(self, item):
        id = self.get_field_value(item)
        if self.get_file_path(id).exists():
            raise KeyFoundError(f"Item {id} already exists")
        self.write_file(item)

    def upsert(self, item):
        "Write the item whether it exists or not"
        self.write_file(self.to_item(item))

    def read_data(self) -> Iterator[Data]:
        for file in sorted(self.path.glob("*.json")):
            yield self.read_file(file.stem)

    def read_file(self, id) -> Data:
        "Read a file of the store"
        with open(self.get_file_path(id), "r") as file:
            return json.load(file, **self.kwds_json_load)

    def write_file(self, item: Item):
        "Write to a file with new content of an item"
        id_value = self.get_field_value(item)
        self.create()
        with open(self.get_file_path(id_value), "w") as file:
            data = self.item_to_dict(item)
            json.dump(data, file, **self.kwds_json_dump)

    def get_field_value(self, item: Item):
        if isinstance(item, dict):
            return item[self.id_field]
        return getattr(item, self.id_field)

    def get_file_path(self, id) -> Path:
        return self.path / f"{id}.json"

    def create(self):
        "Create the store directory"
        self.path.mkdir(parents=True, exist_ok=True)
