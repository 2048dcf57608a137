import csv
import json
from pathlib import Path
from typing import Iterator, List, Optional, TextIO

from sotneuron.base import BaseStore, Item

COMMENT = "#"


class CSVFileStore(BaseStore):
    """CSV file store

    This store has a CSV (comma-separated values) 
    file as a data store. Each item represents a row
    in the file. The file starts with a block of
    ``#`` comment lines holding the provenance
    header (resolved configuration, seed) as JSON.

    Parameters
    ----------
    filename : path-like
        The file
    fieldnames : list of str
        Names of the columns in the CSV file.
        If unspecified, model's fields are used
        instead
    header : dict, optional
        Provenance written as the comment block
        when the file is created.
    model : Type
        Class of an item in the store.
    kwds_csv : dict
        Keyword arguments used to create 
        ``csv.DictWriter`` and ``csv.DictReader``
    
    Examples
    --------

    .. code-block:: python

        store = CSVFileStore(filename="out/phase_diagram.csv", model=PhaseDiagramRow, header={"seed": 1})
    """

    filename: Path
    fieldnames: Optional[List[str]] = None
    header: Optional[dict] = None
    kwds_csv: dict = {}

    def insert(self, item):
        file_non_zero = self.filename.exists() and self.filename.stat().st_size > 0
        if not file_non_zero:
            self.create(if_exists="ignore")
        self.append_file(item)

    def read_data(self) -> Iterator[dict]:
        "Read the rows of the file"
        if not self.filename.is_file():
            return
        with open(self.filename, "r", newline="") as file:
            reader = self.get_reader(self._skip_comments(file))

            # Skip headers
            next(reader, None)

            for data in reader:
                yield data

    def read_header(self) -> dict:
        "Read the provenance comment block"
        lines = []
        with open(self.filename, "r", newline="") as file:
            for line in file:
                if not line.startswith(COMMENT):
                    break
                lines.append(line[len(COMMENT):].strip())
        return json.loads("\n".join(lines)) if lines else {}

    def get_headers(self) -> List[str]:
        "Get headers of the CSV file (using the model)"
        if self.fieldnames is not None:
            return self.fieldnames
        elif hasattr(self.model, "model_fields"):
            return list(self.model.model_fields)
        else:
            raise TypeError("Cannot determine CSV headers")

    def write_file(self, items: List[Item]):
        "Write the file with new content of items"
        self.filename.parent.mkdir(parents=True, exist_ok=True)
        with open(self.filename, "w", newline="") as file:
            self._write_comments(file)
            writer = self.get_writer(file)
            writer.writeheader()
            for item in items:
                writer.writerow(self.item_to_dict(item))

    def append_file(self, item: Item):
        "Write a single item at the end of the file"
        with open(self.filename, "a", newline="") as file:
            writer = self.get_writer(file)
            writer.writerow(self.item_to_dict(item))

    def get_writer(self, buff: TextIO):
        return csv.DictWriter(buff, fieldnames=self.get_headers(), **self.kwds_csv)

    def get_reader(self, buff):
        return csv.DictReader(buff, fieldnames=self.get_headers(), **self.kwds_csv)

    def create(self, if_exists="raise"):
        "Create the file with the comment block and the header row"
        if if_exists == "raise" and self.filename.exists():
            raise FileExistsError(f"File {self.filename} already exists.")
        self.filename.parent.mkdir(parents=True, exist_ok=True)
        with open(self.filename, "w", newline="") as file:
            self._write_comments(file)
            writer = self.get_writer(file)
            writer.writeheader()

    def data_to_item(self, data: dict) -> Item:
        # None values are written as empty strings
        # Therefore we interpret empty strings as None
        data = {key: None if val == "" else val for key, val in data.items()}
        return super().data_to_item(data)

    def _write_comments(self, file: TextIO):
        if not self.header:
            return
        text = json.dumps(self.header, indent=1, sort_keys=True)
        for line in text.splitlines():
            file.write(f"{COMMENT} {line}\n")

    @staticmethod
    def _skip_comments(file: TextIO):
        for line in file:
            if not line.startswith(COMMENT):
                yield line
