from abc import abstractmethod, ABC
from typing import Any, Iterator, List, Mapping, Type, TypeVar

from pydantic import BaseModel, ConfigDict

from sotneuron.exc import DataToItemError, _handle_conversion_error

try:
    from typing import Literal
except ImportError: # pragma: no cover
    from typing_extensions import Literal


Item = TypeVar("Item")
Data = TypeVar("Data")


class BaseStore(ABC, BaseModel):
    """Abstract artifact store

    Base class for the places where simulation
    results are persisted (CSV files, JSON
    directories). Items are dicts or instances
    of a Pydantic model.

    Parameters
    ----------
    model : Type
        Class of an item in the store.
        Commonly dict or subclass of Pydantic
        BaseModel. By default dict
    errors_query : {'raise', 'warn', 'discard'}
        Whether to raise an exception, warn or discard
        the item in case of validation error in 
        converting stored data to the item model.
        By default raise 
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: Type = dict
    errors_query: Literal['raise', 'warn', 'discard'] = 'raise'

    def __iter__(self) -> Iterator[Item]:
        "Iterate over the stored items"
        for data in self.read_data():
            try:
                yield self.data_to_item(data)
            except ValueError:
                _handle_conversion_error(self, data)

    def all(self) -> List[Item]:
        "Return all items"
        return list(self)

    def add(self, item: Any):
        "Add an item to the store"
        self.insert(self.to_item(item))

    def add_many(self, items):
        "Add multiple items to the store"
        for item in items:
            self.add(item)

    @abstractmethod
    def insert(self, item: Item):
        """Insert item to the store
        
        Parameters
        ----------
        item: instance of model
            Item to insert to the store
        """
        ...

    @abstractmethod
    def read_data(self) -> Iterator[Data]:
        "Read raw data (dicts) from the store"
        ...

    def item_to_dict(self, item: Item, exclude_unset=False) -> dict:
        if isinstance(item, dict):
            return item
        elif isinstance(item, BaseModel):
            return item.model_dump(mode="json", exclude_unset=exclude_unset)
        else:
            return dict(**item)

    def data_to_item(self, data: Data) -> Item:
        "Turn stored data (row, document) to an item"
        if isinstance(data, self.model):
            return data
        if not isinstance(data, Mapping):
            data = vars(data)
        try:
            return self.model(**data)
        except Exception as exc:
            raise DataToItemError(f"Could not transform {data}") from exc

    def to_item(self, obj) -> Item:
        "Turn an object to item"
        if isinstance(obj, self.model):
            return obj
        elif isinstance(obj, dict):
            return self.model(**obj)
        elif isinstance(obj, (list, tuple)):
            return self.model(*obj)
        else:
            raise TypeError(f"Cannot cast {type(obj)} to {self.model}")
