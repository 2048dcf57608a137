from copy import copy
import logging

from pydantic import BaseModel

from sotneuron.base import BaseStore


class LogEvent(BaseModel):
    "Log record fields persisted next to the results of a run"
    created: float
    name: str
    levelname: str
    message: str


class StoreHandler(logging.Handler):
    """Log handler that writes log records to a store

    The command-line interface uses this to keep
    warnings and errors of a run in the output
    directory (``events.csv``).

    Parameters
    ----------
    store : BaseStore
        Store where the log records are written.
        If the store's model is ``LogEvent`` (or
        another model), only its fields are kept.
    **kwargs : dict
        Keyword arguments passed to logging.Handler
        init
    """

    def __init__(self, store:BaseStore, **kwargs):
        self.store = store
        super().__init__(**kwargs)

    def emit(self, record:logging.LogRecord):
        "Log the log record"
        record = copy(record)
        msg = self.format(record)
        if isinstance(msg, (dict, logging.LogRecord)):
            # Formatting returned the log record with formatted message
            record = msg
        else:
            record.message = msg
        self.write(vars(record))

    def write(self, record:dict):
        "Write a log record to the store"
        fields = getattr(self.store.model, "model_fields", None)
        if fields is not None:
            record = {key: record[key] for key in fields}
        self.store.add(record)
