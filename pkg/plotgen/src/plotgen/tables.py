"""Parsing of the aggregate CSV schema.

Expected layout (v1):

    # matchreweight-aggregate v1
    # generated <timestamp>          (optional, ignored)
    axis,method,metric,mean,std,n
    0.34,MARSc,balanced_accuracy,0.95,0.01,3
    ...

Raw row strings are retained verbatim so dry-run output can reproduce the
input exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

SCHEMA_LINE = "# matchreweight-aggregate v1"
HEADER = "axis,method,metric,mean,std,n"

METRIC_ACCURACY = "balanced_accuracy"
METRIC_L1 = "l1_error"


class SchemaMismatch(Exception):
    """Input file is not a v1 aggregate CSV."""


@dataclass(frozen=True)
class Row:
    axis: float
    method: str
    metric: str
    mean: float
    std: float
    n: int
    raw: str


@dataclass
class SweepTable:
    rows: list

    def select(self, metric: str) -> list:
        out = [r for r in self.rows if r.metric == metric]
        if not out:
            raise SchemaMismatch(f"no rows with metric {metric!r}")
        return out

    def methods(self, metric: str) -> list:
        seen = []
        for r in self.select(metric):
            if r.method not in seen:
                seen.append(r.method)
        return seen


def load_table(path) -> SweepTable:
    try:
        with open(path) as fh:
            lines = [l.rstrip("\n") for l in fh]
    except OSError as exc:
        raise SchemaMismatch(f"cannot read {path}: {exc}") from exc
    if not lines or lines[0] != SCHEMA_LINE:
        raise SchemaMismatch(f"missing or unknown schema line (expected {SCHEMA_LINE!r})")
    body = [l for l in lines[1:] if l and not l.startswith("#")]
    if not body or body[0] != HEADER:
        raise SchemaMismatch(f"missing header row (expected {HEADER!r})")
    rows = []
    for line in body[1:]:
        parts = line.split(",")
        if len(parts) != 6:
            raise SchemaMismatch(f"expected 6 columns, got {len(parts)}: {line!r}")
        try:
            row = Row(axis=float(parts[0]), method=parts[1], metric=parts[2],
                      mean=float(parts[3]), std=float(parts[4]), n=int(parts[5]), raw=line)
        except ValueError as exc:
            raise SchemaMismatch(f"malformed row {line!r}: {exc}") from exc
        if row.std < 0:
            raise SchemaMismatch(f"negative std in row {line!r}")
        rows.append(row)
    if not rows:
        raise SchemaMismatch("no data rows")
    return SweepTable(rows)
