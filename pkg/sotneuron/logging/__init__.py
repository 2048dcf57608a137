from .handler import StoreHandler
