"""Reading and writing the plain-text formats used by the command line.

Tables are delimiter-separated text with a header row; tab, comma and
whitespace delimiters are recognized. A schema file declares the kind of
each column with lines like ``age = continuous``; the kinds are
``continuous``, ``binary``, ``categorical``, ``response`` and ``ignore``.
Covariate order follows the schema declaration order. Floats are written
with repr-faithful precision so rewritten files are byte-stable.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

import numpy as np

from .design import KINDS, Column, RawDataset
from .errors import DataError

SCHEMA_KINDS = KINDS + ("response", "ignore")


def format_value(v: object) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_table(path: str | os.PathLike, header: list[str], columns: list[np.ndarray | list]) -> None:
    """Write a tab-separated table, one column per entry of ``columns``."""
    n = len(columns[0]) if columns else 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for i in range(n):
            fh.write("\t".join(format_value(col[i]) for col in columns) + "\n")


def read_table(path: str | os.PathLike) -> tuple[list[str], dict[str, list[str]]]:
    """Read a delimited text table with a header row.

    Returns the header and a mapping from column name to string values.
    The delimiter is sniffed from the header line: tab, then comma, then
    arbitrary whitespace.
    """
    if not os.path.exists(path):
        raise DataError(f"input file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip() != ""]
    if not lines:
        raise DataError(f"input file is empty: {path}")
    head = lines[0]
    if "\t" in head:
        rows = list(csv.reader(io.StringIO("\n".join(lines)), delimiter="\t"))
    elif "," in head:
        rows = list(csv.reader(io.StringIO("\n".join(lines)), delimiter=","))
    else:
        rows = [ln.split() for ln in lines]
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataError(f"duplicate column names in {path}")
    data: dict[str, list[str]] = {h: [] for h in header}
    for ln_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: line {ln_no} has {len(row)} fields, expected {len(header)}")
        for h, v in zip(header, row):
            data[h].append(v.strip())
    return header, data


@dataclass(frozen=True)
class Schema:
    """Ordered column declarations: covariates, one optional response, ignores."""

    entries: tuple[tuple[str, str], ...]

    @property
    def covariates(self) -> tuple[tuple[str, str], ...]:
        return tuple((n, k) for n, k in self.entries if k in KINDS)

    @property
    def response(self) -> str | None:
        names = [n for n, k in self.entries if k == "response"]
        return names[0] if names else None


def parse_schema(path: str | os.PathLike) -> Schema:
    """Parse a key-value schema file. Lines look like ``name = kind``."""
    if not os.path.exists(path):
        raise DataError(f"schema file not found: {path}")
    entries: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for ln_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}: line {ln_no} is not of the form 'name = kind'")
            name, kind = (part.strip() for part in line.split("=", 1))
            if kind not in SCHEMA_KINDS:
                raise DataError(
                    f"{path}: line {ln_no}: unknown kind '{kind}' "
                    f"(expected one of {', '.join(SCHEMA_KINDS)})"
                )
            if name in seen:
                raise DataError(f"{path}: column '{name}' declared twice")
            seen.add(name)
            entries.append((name, kind))
    if sum(1 for _, k in entries if k == "response") > 1:
        raise DataError(f"{path}: more than one response column declared")
    if not any(k in KINDS for _, k in entries):
        raise DataError(f"{path}: no covariate columns declared")
    return Schema(tuple(entries))


def write_schema(path: str | os.PathLike, schema: Schema) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for name, kind in schema.entries:
            fh.write(f"{name} = {kind}\n")


def build_dataset(
    table: dict[str, list[str]],
    schema: Schema,
    response: str | None = None,
    require_response: bool = True,
) -> RawDataset:
    """Assemble a RawDataset from a parsed table and a schema.

    ``response`` overrides the schema's response declaration. Continuous
    and response values must parse as floats.
    """
    resp_name = response if response is not None else schema.response
    cols = []
    for name, kind in schema.covariates:
        if name == resp_name:
            continue
        if name not in table:
            raise DataError(f"schema column '{name}' missing from input")
        vals = table[name]
        if kind == "continuous":
            cols.append(Column(name, kind, _parse_floats(name, vals)))
        else:
            cols.append(Column(name, kind, np.asarray(vals, dtype=str)))
    resp = None
    if resp_name is not None:
        if resp_name not in table:
            raise DataError(f"response column '{resp_name}' missing from input")
        resp = _parse_floats(resp_name, table[resp_name])
    elif require_response:
        raise DataError("no response column declared; add 'name = response' to the schema")
    return RawDataset(tuple(cols), resp)


def _parse_floats(name: str, vals: list[str]) -> np.ndarray:
    try:
        return np.array([float(v) for v in vals])
    except ValueError:
        for i, v in enumerate(vals):
            try:
                float(v)
            except ValueError:
                raise DataError(
                    f"column '{name}': cannot parse {v!r} as a number (data row {i + 1})"
                ) from None
        raise


def read_dataset(
    input_path: str | os.PathLike,
    schema_path: str | os.PathLike,
    response: str | None = None,
    require_response: bool = True,
) -> tuple[RawDataset, Schema]:
    schema = parse_schema(schema_path)
    _, table = read_table(input_path)
    return build_dataset(table, schema, response, require_response), schema


def write_key_values(path: str | os.PathLike, items: dict[str, object]) -> None:
    """Write a flat key-value file, one ``key = value`` line per entry."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in items.items():
            fh.write(f"{key} = {format_value(value)}\n")


def read_key_values(path: str | os.PathLike) -> dict[str, str]:
    if not os.path.exists(path):
        raise DataError(f"file not found: {path}")
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}: line {ln_no} is not of the form 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = value
    return out


def write_truth(path: str | os.PathLike, names: list[str], values: np.ndarray) -> None:
    """Coefficient truth file: one ``name<TAB>value`` row per coefficient."""
    write_table(path, ["coefficient", "value"], [names, values])


def read_truth(path: str | os.PathLike) -> dict[str, float]:
    _, table = read_table(path)
    if "coefficient" not in table or "value" not in table:
        raise DataError(f"{path}: expected columns 'coefficient' and 'value'")
    return {
        n: float(v) for n, v in zip(table["coefficient"], table["value"])
    }
