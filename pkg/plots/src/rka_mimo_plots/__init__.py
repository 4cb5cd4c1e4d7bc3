"""Static figure rendering for the rka-mimo experiment CSV tables."""

from .io import SCHEMAS, SchemaError, Table, read_table
from .render import render_figure

__all__ = ["SCHEMAS", "SchemaError", "Table", "read_table", "render_figure"]
