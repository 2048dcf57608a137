from .csv import CSVFileStore
from .json import JSONDirectoryStore
