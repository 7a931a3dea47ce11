"""HTTP service front end: request/response schemas and the app factory."""

from .app import app, create_app
from .schemas import SCHEMA_VERSION, UNITS_NOTE

__all__ = ["app", "create_app", "SCHEMA_VERSION", "UNITS_NOTE"]
