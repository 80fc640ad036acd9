"""Long-format panel data model: validation, event-time bookkeeping, CSV ingestion.

Units and times are remapped to dense integers at construction; the original
labels are kept in side tables (`units`, `times`). Never-treated units carry
the adoption time `NEVER` (infinity) internally; on disk the convention is an
adoption value of 0.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

NEVER = math.inf
"""Adoption-time sentinel for never-treated units."""


class PanelFormatError(ValueError):
    """Malformed input file (bad value, missing column); carries a line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PanelValidationError(ValueError):
    """Structurally invalid panel (duplicates, inconsistent adoption times)."""


@dataclass(frozen=True)
class EventTime:
    """Periods elapsed since adoption; undefined for never-treated units."""

    k: int
    defined: bool


def event_time(adoption, t) -> EventTime:
    """Event time k = t - G; `defined` is False when G is NEVER."""
    if adoption == NEVER:
        return EventTime(k=0, defined=False)
    return EventTime(k=int(t) - int(adoption), defined=True)


def treatment_indicator(adoption, t) -> bool:
    """True iff the unit is ever treated and the period is at or after adoption."""
    return adoption != NEVER and t >= adoption


@dataclass
class PanelDataset:
    """Immutable long-format panel.

    Rows are sorted by (unit, time). `unit_idx`/`time_idx` are dense indices
    into the `units`/`times` label tables. `adoption` holds one calendar
    adoption time per unit (NEVER for never-treated).
    """

    units: np.ndarray          # (n_units,) original unit labels
    times: np.ndarray          # (n_times,) sorted calendar periods
    unit_idx: np.ndarray       # (n,) dense unit index per row
    time_idx: np.ndarray       # (n,) dense time index per row
    y: np.ndarray              # (n,) outcome
    x: np.ndarray              # (n, p) covariates
    adoption: np.ndarray       # (n_units,) calendar adoption time, NEVER allowed
    covariate_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise PanelValidationError("covariate matrix must be (n_rows, p)")
        if not self.covariate_names:
            self.covariate_names = [f"x{j + 1}" for j in range(self.p)]
        if len(self.covariate_names) != self.p:
            raise PanelValidationError("covariate_names length must equal p")
        keys = self.unit_idx.astype(np.int64) * len(self.times) + self.time_idx
        if np.unique(keys).size != keys.size:
            raise PanelValidationError("duplicate (unit, time) rows")
        order = np.lexsort((self.time_idx, self.unit_idx))
        for name in ("unit_idx", "time_idx", "y"):
            setattr(self, name, getattr(self, name)[order])
        self.x = self.x[order]

    @property
    def n_rows(self) -> int:
        return self.y.shape[0]

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_times(self) -> int:
        return len(self.times)

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def is_balanced(self) -> bool:
        return self.n_rows == self.n_units * self.n_times

    def calendar_time(self) -> np.ndarray:
        """Calendar period of each row."""
        return np.asarray(self.times, dtype=float)[self.time_idx]

    def row_adoption(self) -> np.ndarray:
        """Calendar adoption time of each row's unit (NEVER for never-treated)."""
        return self.adoption[self.unit_idx]

    def ever_treated(self) -> np.ndarray:
        """Row indicator: the unit adopts treatment at some point."""
        return np.isfinite(self.row_adoption())

    def event_times(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-row (k, defined) with k = t - G; k is 0 where undefined."""
        g = self.row_adoption()
        defined = np.isfinite(g)
        k = np.zeros(self.n_rows)
        k[defined] = self.calendar_time()[defined] - g[defined]
        return k, defined

    def treated(self) -> np.ndarray:
        """Row indicator D_it: ever-treated and at/after adoption."""
        g = self.row_adoption()
        return np.isfinite(g) & (self.calendar_time() >= g)

    def group_sizes(self) -> dict:
        """Unit counts per adoption time (key NEVER for never-treated)."""
        sizes: dict = {}
        for g in self.adoption:
            key = NEVER if g == NEVER else int(g)
            sizes[key] = sizes.get(key, 0) + 1
        return sizes


@dataclass
class ValidationReport:
    balanced: bool
    duplicate_count: int
    missing_cells: list
    group_sizes: dict

    def to_json(self) -> str:
        sizes = {("never" if k == NEVER else str(k)): v for k, v in self.group_sizes.items()}
        return json.dumps(
            {
                "balanced": self.balanced,
                "duplicate_count": self.duplicate_count,
                "missing_cells": [[str(u), int(t)] for u, t in self.missing_cells],
                "group_sizes": sizes,
            },
            indent=2,
        )


def validate_panel(panel: PanelDataset) -> ValidationReport:
    """Report-only structural check (a constructed PanelDataset is duplicate-free)."""
    present = set(zip(panel.unit_idx.tolist(), panel.time_idx.tolist()))
    missing = [
        (panel.units[u], panel.times[t])
        for u in range(panel.n_units)
        for t in range(panel.n_times)
        if (u, t) not in present
    ]
    return ValidationReport(
        balanced=len(missing) == 0,
        duplicate_count=0,
        missing_cells=missing,
        group_sizes=panel.group_sizes(),
    )


@dataclass(frozen=True)
class PanelSchema:
    """Column-name mapping for CSV ingestion. Covariate order defines X columns."""

    unit: str
    time: str
    outcome: str
    adoption: str
    covariates: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "PanelSchema":
        return cls(
            unit=d["unit"],
            time=d["time"],
            outcome=d["outcome"],
            adoption=d["adoption"],
            covariates=tuple(d.get("covariates", ())),
        )


DEFAULT_SCHEMA = PanelSchema(unit="unit", time="time", outcome="y", adoption="adoption",
                             covariates=())


def build_panel(unit_labels, time_values, y, x, adoption_by_row,
                covariate_names=None) -> PanelDataset:
    """Assemble a PanelDataset from long-format arrays.

    `adoption_by_row` is per-row and must be constant within unit (NEVER for
    never-treated). Units and times are remapped to dense indices.
    """
    unit_labels = np.asarray(unit_labels)
    time_values = np.asarray(time_values)
    adoption_by_row = np.asarray(adoption_by_row, dtype=float)
    units, unit_idx = np.unique(unit_labels, return_inverse=True)
    times, time_idx = np.unique(time_values, return_inverse=True)
    adoption = np.full(len(units), NEVER)
    seen = np.zeros(len(units), dtype=bool)
    for row in range(len(unit_labels)):
        u = unit_idx[row]
        if seen[u] and adoption[u] != adoption_by_row[row]:
            raise PanelValidationError(
                f"unit {units[u]!r} has inconsistent adoption times "
                f"({adoption[u]} vs {adoption_by_row[row]})"
            )
        adoption[u] = adoption_by_row[row]
        seen[u] = True
    return PanelDataset(
        units=units,
        times=times,
        unit_idx=unit_idx.astype(np.int64),
        time_idx=time_idx.astype(np.int64),
        y=np.asarray(y, dtype=float),
        x=np.asarray(x, dtype=float),
        adoption=adoption,
        covariate_names=list(covariate_names) if covariate_names else [],
    )


def load_panel(path, schema: PanelSchema, delimiter: str = ",") -> PanelDataset:
    """Load and validate a long-format CSV panel.

    Requires a header row. The adoption column uses 0 for never-treated.
    Raises PanelFormatError (with line number) on malformed rows and
    PanelValidationError on duplicate (unit, time) pairs.
    """
    unit_labels, time_values, ys, adoptions = [], [], [], []
    xs: list[list[float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelFormatError("empty file", line=1) from None
        header = [h.strip() for h in header]
        col = {name: i for i, name in enumerate(header)}
        needed = [schema.unit, schema.time, schema.outcome, schema.adoption,
                  *schema.covariates]
        for name in needed:
            if name not in col:
                raise PanelFormatError(f"missing column {name!r}", line=1)
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise PanelFormatError(
                    f"expected {len(header)} fields, got {len(row)}", line=line_no)
            try:
                unit = int(float(row[col[schema.unit]]))
                t = int(float(row[col[schema.time]]))
            except ValueError:
                raise PanelFormatError("non-numeric unit or time", line=line_no) from None
            try:
                yval = float(row[col[schema.outcome]])
            except ValueError:
                raise PanelFormatError(
                    f"non-numeric outcome {row[col[schema.outcome]]!r}", line=line_no
                ) from None
            try:
                g_raw = float(row[col[schema.adoption]])
            except ValueError:
                raise PanelFormatError(
                    f"non-numeric adoption time {row[col[schema.adoption]]!r}",
                    line=line_no) from None
            try:
                xrow = [float(row[col[c]]) for c in schema.covariates]
            except ValueError:
                raise PanelFormatError("non-numeric covariate", line=line_no) from None
            unit_labels.append(unit)
            time_values.append(t)
            ys.append(yval)
            adoptions.append(NEVER if g_raw == 0 else g_raw)
            xs.append(xrow)
    if not unit_labels:
        raise PanelFormatError("no data rows", line=2)
    key_seen: dict = {}
    for i, key in enumerate(zip(unit_labels, time_values)):
        if key in key_seen:
            raise PanelValidationError(f"duplicate (unit, time) pair {key}")
        key_seen[key] = i
    x = np.asarray(xs, dtype=float).reshape(len(ys), len(schema.covariates))
    return build_panel(unit_labels, time_values, ys, x, adoptions,
                       covariate_names=list(schema.covariates))


def write_panel(panel: PanelDataset, path, schema: PanelSchema | None = None,
                delimiter: str = ",") -> None:
    """Write a panel back to CSV (adoption 0 for never-treated).

    Floats are written with shortest round-trip repr, so numeric content
    survives a load/write/load cycle exactly.
    """
    if schema is None:
        schema = PanelSchema(unit="unit", time="time", outcome="y", adoption="adoption",
                             covariates=tuple(panel.covariate_names))
    g_row = panel.row_adoption()
    t_row = panel.calendar_time()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow([schema.unit, schema.time, schema.outcome, schema.adoption,
                         *schema.covariates])
        for i in range(panel.n_rows):
            g = 0 if g_row[i] == NEVER else int(g_row[i])
            writer.writerow([
                panel.units[panel.unit_idx[i]],
                int(t_row[i]),
                repr(float(panel.y[i])),
                g,
                *[repr(float(v)) for v in panel.x[i]],
            ])
