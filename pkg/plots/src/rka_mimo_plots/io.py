"""Reading and validating the experiment CSV tables.

Each table starts with a ``# schema=<id>`` line, then zero or more
``# key=value`` metadata lines, then a header row and the data body.
"""

from dataclasses import dataclass, field
from pathlib import Path

# column layout per schema id; None marks a string-valued column,
# float marks a numeric one
SCHEMAS = {
    "fig1": (("estimator", None), ("correlation", None), ("alpha", float),
             ("p", float), ("cdf", float)),
    "fig2": (("init", None), ("estimator", None), ("correlation", None),
             ("T", float), ("se_mean", float), ("se_stderr", float),
             ("se_rzf_ref", float)),
    "fig3": (("loading", float), ("estimator", None), ("correlation", None),
             ("T", float), ("gap_percent", float)),
    "fig4": (("panel", None), ("r", float), ("sigma", float),
             ("T", float), ("gap_percent", float)),
    "fig5": (("loading", float), ("M", float), ("K", float),
             ("t_upper_rzf", float), ("t_upper_zf", float)),
}


class SchemaError(ValueError):
    """Input CSV does not match the schema expected for the figure."""


@dataclass
class Table:
    """One validated CSV table: typed columns plus file metadata."""

    schema_id: str
    columns: tuple
    rows: list
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def groups(self, *names):
        """Distinct key tuples over the named columns, in file order."""
        idxs = [self.columns.index(n) for n in names]
        seen, out = set(), []
        for row in self.rows:
            key = tuple(row[i] for i in idxs)
            if key not in seen:
                seen.add(key)
                out.append(key)
        return out

    def select(self, **criteria):
        idxs = {self.columns.index(k): v for k, v in criteria.items()}
        return [row for row in self.rows
                if all(row[i] == v for i, v in idxs.items())]


def read_table(path, expected_schema) -> Table:
    """Parse and validate one CSV file against ``expected_schema``.

    Raises SchemaError on a schema-id mismatch, wrong columns, an empty
    body, or a cell that fails numeric conversion.
    """
    path = Path(path)
    if expected_schema not in SCHEMAS:
        raise SchemaError(f"unknown schema id {expected_schema!r}")
    lines = path.read_text().splitlines()

    metadata, body_start, schema_id = {}, 0, None
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = i
            break
        key, sep, value = line.lstrip("# ").partition("=")
        if not sep:
            raise SchemaError(f"{path}: malformed metadata line {i + 1}: {line!r}")
        if i == 0:
            if key != "schema":
                raise SchemaError(f"{path}: first line must declare the schema")
            schema_id = value
        else:
            metadata[key] = value
    else:
        raise SchemaError(f"{path}: no header row found")

    if schema_id is None:
        raise SchemaError(f"{path}: first line must declare the schema")
    if schema_id != expected_schema:
        raise SchemaError(
            f"{path}: schema is {schema_id!r}, expected {expected_schema!r}")

    spec = SCHEMAS[expected_schema]
    expected_cols = tuple(name for name, _ in spec)
    header = tuple(c.strip() for c in lines[body_start].split(","))
    if header != expected_cols:
        raise SchemaError(
            f"{path}: columns {header} do not match schema "
            f"{expected_schema} ({expected_cols})")

    rows = []
    for lineno, line in enumerate(lines[body_start + 1:], body_start + 2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(spec):
            raise SchemaError(f"{path}:{lineno}: expected {len(spec)} cells")
        row = []
        for cell, (name, kind) in zip(cells, spec):
            cell = cell.strip()
            if kind is float:
                try:
                    row.append(float(cell))
                except ValueError:
                    raise SchemaError(
                        f"{path}:{lineno}: column {name!r} is not numeric: "
                        f"{cell!r}") from None
            else:
                row.append(cell)
        rows.append(tuple(row))

    if not rows:
        raise SchemaError(f"{path}: table body is empty")
    return Table(expected_schema, expected_cols, rows, metadata)
