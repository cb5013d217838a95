"""
Mixed continuous/ordinal data with missingness, plus CSV and schema I/O.

Cells are addressed 0-based as (row, column) throughout the package. Missing
cells hold NaN in `MixedDataset.values` and False in `MixedDataset.mask`.
"""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import DataFormatError

logger = logging.getLogger(__name__)

CONTINUOUS = 'continuous'
ORDINAL = 'ordinal'

# Continuous values are written with 17 significant digits: enough for an
# exact float64 round trip.
FLOAT_FORMAT = '.17g'


@dataclass(frozen=True)
class ColumnKind:
    kind: str
    levels: Optional[int] = None

    def __post_init__(self):
        if self.kind == CONTINUOUS:
            if self.levels is not None:
                raise ValueError("Continuous columns do not take a number of levels")
        elif self.kind == ORDINAL:
            if self.levels is None or int(self.levels) != self.levels or self.levels < 2:
                raise ValueError(f"Ordinal columns need levels >= 2, got {self.levels!r}")
        else:
            raise ValueError(f"Unknown column kind {self.kind!r}")

    @classmethod
    def continuous(cls):
        return cls(CONTINUOUS)

    @classmethod
    def ordinal(cls, levels):
        return cls(ORDINAL, int(levels))

    @property
    def is_ordinal(self):
        return self.kind == ORDINAL

    def token(self):
        """Short form used on the command line: `continuous` or `ordinal:3`."""
        return CONTINUOUS if not self.is_ordinal else f"{ORDINAL}:{self.levels}"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: ColumnKind


Schema = Sequence[ColumnSpec]


@dataclass(frozen=True, eq=False)
class MixedDataset:
    """Immutable n×p table of optional cells with a per-column kind."""

    values: np.ndarray
    kinds: Tuple[ColumnKind, ...]
    names: Tuple[str, ...] = ()
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d matrix")
        n, p = values.shape
        if n < 2 or p < 1:
            raise ValueError(f"A dataset needs n >= 2 rows and p >= 1 columns, got {n}x{p}")
        kinds = tuple(self.kinds)
        if len(kinds) != p:
            raise ValueError(f"{len(kinds)} column kinds declared for {p} columns")
        names = tuple(self.names) if self.names else tuple(f"X{j + 1}" for j in range(p))
        if len(names) != p:
            raise ValueError(f"{len(names)} column names for {p} columns")

        observed = ~np.isnan(values)
        if self.mask is not None:
            mask = np.array(self.mask, dtype=bool, copy=True)
            if mask.shape != values.shape or np.any(mask != observed):
                raise ValueError("mask must be True exactly where a value is present")
        else:
            mask = observed

        for j, kind in enumerate(kinds):
            if not kind.is_ordinal:
                continue
            col = values[mask[:, j], j]
            bad = (col != np.round(col)) | (col < 1) | (col > kind.levels)
            if np.any(bad):
                raise ValueError(
                    f"Column '{names[j]}' holds {col[bad][0]!r}, outside categories 1..{kind.levels}")

        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'kinds', kinds)
        object.__setattr__(self, 'names', names)
        object.__setattr__(self, 'mask', mask)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    @property
    def schema(self):
        return [ColumnSpec(name, kind) for name, kind in zip(self.names, self.kinds)]

    def observed_values(self, j):
        """Observed cells of column j, in row order."""
        return self.values[self.mask[:, j], j]

    def n_missing(self):
        return int((~self.mask).sum())

    def with_values(self, values):
        """Copy of this dataset carrying new cell values (and the mask they imply)."""
        return MixedDataset(values, self.kinds, self.names)

    def equals(self, other):
        return (
            isinstance(other, MixedDataset)
            and self.kinds == other.kinds
            and self.names == other.names
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


@dataclass
class CellIndexSets:
    obs_cont: List[Tuple[int, int]]
    obs_ord: List[Tuple[int, int]]
    miss_cont: List[Tuple[int, int]]
    miss_ord: List[Tuple[int, int]]

    def total(self):
        return len(self.obs_cont) + len(self.obs_ord) + len(self.miss_cont) + len(self.miss_ord)


def index_sets(d: MixedDataset) -> CellIndexSets:
    """Split every cell into observed/missing × continuous/ordinal."""
    ordinal = np.array([k.is_ordinal for k in d.kinds])
    ordinal_cells = np.broadcast_to(ordinal, d.values.shape)

    def cells(selector):
        rows, cols = np.nonzero(selector)
        return [(int(i), int(j)) for i, j in zip(rows, cols)]

    return CellIndexSets(
        obs_cont=cells(d.mask & ~ordinal_cells),
        obs_ord=cells(d.mask & ordinal_cells),
        miss_cont=cells(~d.mask & ~ordinal_cells),
        miss_ord=cells(~d.mask & ordinal_cells),
    )


# ================================
# SCHEMA
# ================================


def parse_kind(token: str) -> ColumnKind:
    """Parse `continuous`, `ordinal:3` (or the short forms `c`, `o3`)."""
    text = token.strip().lower()
    if text in (CONTINUOUS, 'c'):
        return ColumnKind.continuous()
    if text.startswith(ORDINAL):
        levels = text[len(ORDINAL):].lstrip(':,')
    elif text.startswith('o'):
        levels = text[1:].lstrip(':')
    else:
        raise ValueError(f"Unknown column kind {token!r}")
    try:
        return ColumnKind.ordinal(int(levels))
    except ValueError as exc:
        raise ValueError(f"Bad ordinal declaration {token!r}: {exc}") from exc


def parse_schema_flag(text: str) -> List[ColumnKind]:
    """Comma separated kinds in column order, e.g. `c,c,o3,ordinal:2`."""
    return [parse_kind(token) for token in text.split(',') if token.strip()]


def read_schema(path: Union[str, Path]) -> List[ColumnSpec]:
    """Read a schema file with one `name,kind[,levels]` line per column."""
    frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False,
                        skip_blank_lines=True, names=['name', 'kind', 'levels'])
    specs = []
    for line, row in enumerate(frame.itertuples(index=False), start=1):
        name = row.name.strip()
        kind = row.kind.strip().lower()
        levels = (row.levels or '').strip()
        try:
            if kind == ORDINAL:
                specs.append(ColumnSpec(name, ColumnKind.ordinal(int(levels))))
            else:
                specs.append(ColumnSpec(name, parse_kind(kind)))
        except ValueError as exc:
            raise DataFormatError(f"Invalid schema entry: {exc}", row=line, column=name) from exc
    if not specs:
        raise DataFormatError(f"Schema file {path} declares no columns")
    return specs


def write_schema(d: MixedDataset, path: Union[str, Path]) -> None:
    lines = []
    for name, kind in zip(d.names, d.kinds):
        lines.append(f"{name},{ORDINAL},{kind.levels}" if kind.is_ordinal else f"{name},{CONTINUOUS}")
    Path(path).write_text('\n'.join(lines) + '\n', encoding='utf-8')


def _as_specs(schema, header):
    specs = []
    for name, item in zip(header, schema):
        specs.append(item if isinstance(item, ColumnSpec) else ColumnSpec(name, item))
    return specs


# ================================
# CSV
# ================================


def _scan_records(path) -> List[str]:
    """Header of a CSV after checking that every record has exactly its width."""
    with open(path, newline='', encoding='utf-8') as handle:
        records = (record for record in csv.reader(handle) if record)
        header = next(records, None)
        if header is None:
            raise DataFormatError(f"{path} has no header row")
        duplicates = sorted({name for name in header if header.count(name) > 1})
        if duplicates:
            raise DataFormatError("Duplicate column name in header", column=duplicates[0])
        for row, record in enumerate(records, start=1):
            if len(record) != len(header):
                side = 'too few' if len(record) < len(header) else 'too many'
                raise DataFormatError(
                    f"Ragged row: {side} fields ({len(record)} for {len(header)} columns)", row=row)
    return header


def read_csv(path: Union[str, Path], schema, missing_token: str = 'NA') -> MixedDataset:
    """Load a dataset; `missing_token` and empty fields both mark a missing cell.

    `schema` is a sequence of ColumnSpec or of bare ColumnKind (column names
    then come from the header row, which is kept verbatim).
    """
    header = _scan_records(path)
    if len(header) != len(schema):
        raise DataFormatError(
            f"Header of {path} has {len(header)} columns but the schema declares {len(schema)}")
    specs = _as_specs(schema, header)
    try:
        frame = pd.read_csv(path, header=0, names=header, index_col=False, dtype=str,
                            keep_default_na=False, na_filter=False, skip_blank_lines=True,
                            encoding='utf-8')
    except pd.errors.ParserError as exc:
        raise DataFormatError(f"Malformed CSV {path}: {exc}") from exc

    raw = frame.to_numpy(dtype=object)
    values = np.full(raw.shape, np.nan)
    for j, spec in enumerate(specs):
        text = np.array([str(cell).strip() for cell in raw[:, j]], dtype=object)
        missing = (text == missing_token) | (text == '')
        rows = np.nonzero(~missing)[0]
        parsed = np.empty(rows.size)
        for k, i in enumerate(rows):
            # float() parses the shortest-repr text back to the exact double
            try:
                parsed[k] = float(text[i])
            except ValueError:
                parsed[k] = np.nan
            if not np.isfinite(parsed[k]):
                raise DataFormatError("Cannot parse number", row=int(i) + 1, column=header[j], value=text[i])
        if spec.kind.is_ordinal:
            bad = (parsed != np.round(parsed)) | (parsed < 1) | (parsed > spec.kind.levels)
            if np.any(bad):
                i = rows[np.argmax(bad)]
                raise DataFormatError(
                    f"Ordinal value outside 1..{spec.kind.levels}",
                    row=int(i) + 1, column=header[j], value=text[i])
        values[rows, j] = parsed

    dataset = MixedDataset(values, tuple(s.kind for s in specs), tuple(header))
    logger.debug(f"Read {path}: {dataset.n}x{dataset.p}, {dataset.n_missing()} missing cells")
    return dataset


def _format_cells(d: MixedDataset, missing_token: str) -> np.ndarray:
    cells = np.empty(d.values.shape, dtype=object)
    for j, kind in enumerate(d.kinds):
        for i in range(d.n):
            if not d.mask[i, j]:
                cells[i, j] = missing_token
            elif kind.is_ordinal:
                cells[i, j] = str(int(d.values[i, j]))
            else:
                cells[i, j] = format(d.values[i, j], FLOAT_FORMAT)
    return cells


def write_csv(d: MixedDataset, path: Union[str, Path], missing_token: str = 'NA') -> None:
    frame = pd.DataFrame(_format_cells(d, missing_token), columns=list(d.names))
    frame.to_csv(path, index=False, lineterminator='\n', encoding='utf-8')


def write_mask_csv(d: MixedDataset, path: Union[str, Path]) -> None:
    """0/1 observed-cell mask, one column per variable (1 = observed)."""
    frame = pd.DataFrame(d.mask.astype(int), columns=list(d.names))
    frame.to_csv(path, index=False, lineterminator='\n')


def write_matrix_csv(matrix: np.ndarray, path: Union[str, Path], names: Sequence[str]) -> None:
    frame = pd.DataFrame(
        [[format(v, FLOAT_FORMAT) for v in row] for row in np.asarray(matrix)],
        columns=list(names))
    frame.to_csv(path, index=False, lineterminator='\n')
