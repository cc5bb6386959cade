"""CSV dataset ingestion/export and JSON run configuration.

Datasets use a wide CSV schema with one row per group:
``group_id, y0, y1, d0, d1, z0_1..z0_k, z1_1..z1_k, x0_1..x0_m, x1_1..x1_m``.
Floats are serialized at full round-trip precision.  Every output file
starts with ``#`` comment lines recording the resolved configuration and
seed that produced it.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .errors import DataError
from .model import GroupRecord, Layout, make_dataset

_FIXED_COLUMNS = ("group_id", "y0", "y1", "d0", "d1")


def _format_value(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def dataset_columns(layout):
    cols = list(_FIXED_COLUMNS)
    for unit in (0, 1):
        cols.extend(f"z{unit}_{k + 1}" for k in range(layout.z_dim))
    for unit in (0, 1):
        cols.extend(f"x{unit}_{k + 1}" for k in range(layout.x_dim))
    return cols


def write_dataset_csv(dataset, path, header_comment=None):
    """Write a dataset in the wide schema with an optional comment header."""
    layout = dataset.layout
    cols = dataset_columns(layout)
    with open(path, "w", newline="") as fh:
        for line in _comment_lines(header_comment):
            fh.write(line)
        writer = csv.writer(fh)
        writer.writerow(cols)
        for g, rec in enumerate(dataset.groups):
            row = [rec.group_id,
                   _format_value(dataset.y[g, 0]), _format_value(dataset.y[g, 1]),
                   int(dataset.d[g, 0]), int(dataset.d[g, 1])]
            for unit in (0, 1):
                row.extend(_format_value(v) for v in dataset.w[g, unit, :layout.z_dim])
            for unit in (0, 1):
                row.extend(_format_value(v) for v in dataset.w[g, unit, layout.z_dim:])
            writer.writerow(row)


def _comment_lines(header_comment):
    if not header_comment:
        return []
    payload = json.dumps(header_comment, sort_keys=True, default=str)
    return [f"# {payload}\n"]


def _column_layout(header):
    missing = [c for c in _FIXED_COLUMNS if c not in header]
    if missing:
        raise DataError(f"schema mismatch, missing columns: {', '.join(missing)}")
    z_dim = sum(1 for c in header if c.startswith("z0_"))
    x_dim = sum(1 for c in header if c.startswith("x0_"))
    expected = dataset_columns(Layout(z_dim=z_dim, x_dim=x_dim))
    missing = [c for c in expected if c not in header]
    if missing:
        raise DataError(f"schema mismatch, missing columns: {', '.join(missing)}")
    if z_dim < 1:
        raise DataError("schema mismatch, missing columns: z0_1, z1_1")
    return Layout(z_dim=z_dim, x_dim=x_dim)


def load_dataset_csv(path):
    """Parse the wide schema and return a validated Dataset."""
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        lines = [(n + 1, line) for n, line in enumerate(fh)
                 if line.strip() and not line.lstrip().startswith("#")]
    if not lines:
        raise DataError(f"{path} contains no data rows")
    header = next(csv.reader([lines[0][1]]))
    layout = _column_layout([c.strip() for c in header])
    idx = {c.strip(): k for k, c in enumerate(header)}

    groups = []
    for line_no, raw in lines[1:]:
        fields = next(csv.reader([raw]))
        if len(fields) != len(header):
            raise DataError(f"parse error at line {line_no}: expected "
                            f"{len(header)} fields, got {len(fields)}")

        def grab(col, caster=float):
            try:
                return caster(fields[idx[col]])
            except ValueError:
                raise DataError(
                    f"parse error at line {line_no}: bad value "
                    f"{fields[idx[col]]!r} in column {col}")

        w = []
        for unit in (0, 1):
            z = [grab(f"z{unit}_{k + 1}") for k in range(layout.z_dim)]
            x = [grab(f"x{unit}_{k + 1}") for k in range(layout.x_dim)]
            w.append(tuple(z + x))
        groups.append(GroupRecord(
            group_id=grab("group_id", int),
            y=(grab("y0"), grab("y1")),
            d=(grab("d0"), grab("d1")),
            w=tuple(w),
            x_dim=layout.x_dim))
    return make_dataset(groups, layout)


def write_rows_csv(path, columns, rows, header_comment=None):
    """Generic results writer: a comment header, a column row, data rows."""
    with open(path, "w", newline="") as fh:
        for line in _comment_lines(header_comment):
            fh.write(line)
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_value(row[c]) for c in columns])


def coverage_table_rows(result):
    """Coverage table rows in the panel layout: one row per
    (effect kind, fixed arm) with columns for the five evaluation points
    and the copula correlation."""
    from .inference import EVAL_POINTS

    by_label = {t.label(): k for k, t in enumerate(result.targets)}
    rows = []
    for kind in ("MCDE", "MCSE"):
        for d in (1, 0):
            row = {"panel": kind, "d": d}
            for p0, p1 in EVAL_POINTS:
                label = f"{kind}({d})@({p0:g},{p1:g})"
                k = by_label.get(label)
                row[f"({p0:g},{p1:g})"] = (float(result.coverage[k])
                                           if k is not None else float("nan"))
            k = by_label.get("rho")
            row["rho"] = float(result.coverage[k]) if k is not None else float("nan")
            rows.append(row)
    return rows


def load_config_json(path):
    """Load a JSON run configuration; must be a flat object."""
    if not os.path.exists(path):
        raise DataError(f"no such config file: {path}")
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON config: {exc}")
    if not isinstance(cfg, dict):
        raise DataError("config file must contain a JSON object")
    return cfg
