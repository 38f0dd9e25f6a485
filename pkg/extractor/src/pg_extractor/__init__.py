"""pickleguard-extractor: Python source → interchange AST dumps."""

__version__ = "0.1.0"

from .extract import extract, schema_check  # noqa: F401
