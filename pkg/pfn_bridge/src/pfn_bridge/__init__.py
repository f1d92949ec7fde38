"""Serve a tabular regressor behind a line-oriented JSON fit-predict protocol."""
from .models import build_model
from .server import BridgeConfig, RequestHandler, serve

__version__ = "0.1.0"

__all__ = ["BridgeConfig", "RequestHandler", "build_model", "serve"]
