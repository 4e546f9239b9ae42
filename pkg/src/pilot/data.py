"""Dataset representation: CSV ingestion, column typing, centering, presorting.

A :class:`Dataset` is immutable after construction.  Numeric predictors are
stored as float64 vectors, categorical predictors as dense level ids with a
level-name table, and every numeric predictor carries a presorted index
column so split scans never re-sort.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import IngestError
from .kinds import ALL_KINDS, ModelKind


class ColumnKind(enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class ColumnMeta:
    """Name, kind and (for categorical columns) the level-name table."""

    name: str
    kind: ColumnKind
    levels: tuple[str, ...] | None = None

    @property
    def n_levels(self) -> int:
        return 0 if self.levels is None else len(self.levels)


@dataclass(frozen=True)
class CenteredResponse:
    """Response shifted by its midrange so that max = -min = ``bound_B``."""

    values: np.ndarray
    offset: float
    bound_B: float


def center_response(raw: np.ndarray | Sequence[float]) -> CenteredResponse:
    """Center a response vector around its midrange.

    Parameters
    ----------
    raw : array-like of float, length >= 1

    Returns
    -------
    CenteredResponse
        ``values = raw - offset`` with ``offset = (min + max) / 2`` and
        ``bound_B = (max - min) / 2``.  A constant vector yields
        ``bound_B = 0``.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise IngestError("response must be a non-empty 1-D vector")
    lo = float(arr.min())
    hi = float(arr.max())
    offset = (lo + hi) / 2.0
    values = arr - offset
    # Take the realized max so |values| <= bound_B holds exactly in floats.
    bound = max(hi - offset, offset - lo, 0.0)
    return CenteredResponse(values=values, offset=offset, bound_B=bound)


@dataclass(frozen=True)
class Hyperparams:
    """Training controls.

    ``allowed_kinds`` always contains CON; restricting it to ``{CON, PCON}``
    turns the learner into an unpruned piecewise-constant regression tree.
    """

    max_depth: int = 12
    min_fit: int = 10
    min_leaf: int = 5
    allowed_kinds: frozenset[ModelKind] = ALL_KINDS
    min_unique_for_lin_blin: int = 5
    min_unique_per_child_for_plin: int = 5
    rss_floor_scale: float = 1e-12
    max_lin_chain: int = 100
    min_rel_gain_lin: float = 1e-10

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_fit < 1:
            raise ValueError("min_fit must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.rss_floor_scale < 0:
            raise ValueError("rss_floor_scale must be >= 0")
        if self.max_lin_chain < 0:
            raise ValueError("max_lin_chain must be >= 0")
        if self.min_rel_gain_lin < 0:
            raise ValueError("min_rel_gain_lin must be >= 0")
        kinds = frozenset(ModelKind(k) if not isinstance(k, ModelKind) else k
                          for k in self.allowed_kinds)
        object.__setattr__(self, "allowed_kinds", kinds | {ModelKind.CON})

    @classmethod
    def cart_mode(cls, **kwargs) -> "Hyperparams":
        """Constant-fits-only configuration: piecewise-constant splits."""
        kwargs.setdefault("allowed_kinds", frozenset({ModelKind.CON, ModelKind.PCON}))
        return cls(**kwargs)


@dataclass(frozen=True)
class Dataset:
    """Immutable feature table plus response.

    Attributes
    ----------
    columns : tuple of ndarray
        One vector per predictor; float64 for numeric columns, int64 dense
        level ids for categorical columns.
    column_meta : tuple of ColumnMeta
    response : ndarray of float64
    response_name : str
    sorted_index : ndarray, shape (n_rows, n_numeric)
        Column ``s`` lists the row ids in ascending order of the ``s``-th
        numeric predictor, ties kept in original row order.
    numeric_cols : tuple of int
        Indices into ``columns`` of the numeric predictors, in the order of
        the ``sorted_index`` columns.
    """

    columns: tuple[np.ndarray, ...]
    column_meta: tuple[ColumnMeta, ...]
    response: np.ndarray
    response_name: str
    sorted_index: np.ndarray
    numeric_cols: tuple[int, ...]

    @property
    def n_rows(self) -> int:
        return int(self.response.shape[0])

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    def numeric_slot(self, col: int) -> int:
        """Position of predictor ``col`` inside ``sorted_index``."""
        return self.numeric_cols.index(col)

    def column_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.column_meta)

    def take(self, rows: np.ndarray) -> "Dataset":
        """New dataset restricted to ``rows`` (presorting is redone)."""
        cols = tuple(c[rows] for c in self.columns)
        return _assemble(cols, self.column_meta, self.response[rows], self.response_name)

    def feature_table(self) -> dict[str, object]:
        """Decode the predictors into a name-keyed table of raw values."""
        out: dict[str, object] = {}
        for meta, col in zip(self.column_meta, self.columns):
            if meta.kind is ColumnKind.NUMERIC:
                out[meta.name] = col.copy()
            else:
                names = np.asarray(meta.levels, dtype=object)
                out[meta.name] = names[col].tolist()
        return out


def presort(dataset: Dataset) -> np.ndarray:
    """Fresh (n_rows, n_numeric) matrix of per-predictor ascending row ids."""
    values = [dataset.columns[c] for c in dataset.numeric_cols]
    return _presort_values(values, dataset.n_rows)


def _presort_values(values: Sequence[np.ndarray], n_rows: int) -> np.ndarray:
    if n_rows >= 2 ** 31:
        raise IngestError("datasets beyond 2^31 rows are not supported")
    out = np.empty((n_rows, len(values)), dtype=np.int32)
    for slot, v in enumerate(values):
        out[:, slot] = np.argsort(v, kind="stable")
    return out


def _assemble(columns, column_meta, response, response_name) -> Dataset:
    numeric_cols = tuple(i for i, m in enumerate(column_meta)
                         if m.kind is ColumnKind.NUMERIC)
    n = int(np.asarray(response).shape[0])
    sorted_index = _presort_values([columns[c] for c in numeric_cols], n)
    return Dataset(
        columns=tuple(columns),
        column_meta=tuple(column_meta),
        response=np.asarray(response, dtype=np.float64),
        response_name=response_name,
        sorted_index=sorted_index,
        numeric_cols=numeric_cols,
    )


def from_arrays(
    features: Mapping[str, Sequence] | Sequence[tuple[str, Sequence]],
    response: Sequence[float],
    response_name: str = "y",
) -> Dataset:
    """Build a dataset from in-memory columns.

    Float columns become numeric predictors.  Columns of strings become
    categorical predictors with levels in first-appearance order.  Non-finite
    numeric entries are rejected.
    """
    items = list(features.items()) if isinstance(features, Mapping) else list(features)
    y = np.asarray(response, dtype=np.float64)
    if y.ndim != 1 or y.size == 0:
        raise IngestError("response must be a non-empty 1-D vector")
    if not np.all(np.isfinite(y)):
        raise IngestError(f"non-finite value in target column {response_name!r}")
    columns: list[np.ndarray] = []
    meta: list[ColumnMeta] = []
    for name, raw in items:
        first = raw[0] if len(raw) > 0 else 0.0
        if isinstance(first, str):
            codes, levels = _encode_levels(name, [str(v) for v in raw])
            columns.append(codes)
            meta.append(ColumnMeta(name, ColumnKind.CATEGORICAL, levels))
        else:
            vals = np.asarray(raw, dtype=np.float64)
            if not np.all(np.isfinite(vals)):
                bad = int(np.flatnonzero(~np.isfinite(vals))[0])
                raise IngestError(f"non-finite value in column {name!r}, row {bad + 1}")
            columns.append(vals)
            meta.append(ColumnMeta(name, ColumnKind.NUMERIC))
        if len(raw) != y.size:
            raise IngestError(f"column {name!r} has {len(raw)} rows, expected {y.size}")
    return _assemble(columns, meta, y, response_name)


def _encode_levels(name: str, tokens: list[str]) -> tuple[np.ndarray, tuple[str, ...]]:
    table: dict[str, int] = {}
    codes = np.empty(len(tokens), dtype=np.int64)
    for i, tok in enumerate(tokens):
        code = table.get(tok)
        if code is None:
            code = len(table)
            table[tok] = code
        codes[i] = code
    return codes, tuple(table.keys())


def ingest_csv(
    path: str,
    target: str,
    categorical_override: Iterable[str] = (),
) -> Dataset:
    """Read an RFC-4180-style CSV file into a :class:`Dataset`.

    The first row is the header.  A column is numeric when every token
    parses as a finite float; any other token makes the whole column
    categorical, as does listing its name in ``categorical_override``.
    Missing (empty) cells are rejected, naming the offending cell.

    Parameters
    ----------
    path : str
        CSV file with a header row, UTF-8, '.' decimal separator.
    target : str
        Name of the response column; must parse numeric.
    categorical_override : iterable of str
        Column names forced to categorical regardless of content.

    Raises
    ------
    IngestError
        Missing values, absent or non-numeric target, zero data rows,
        ragged rows, or an override naming the target.
    """
    override = set(categorical_override)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file, expected a header row") from None
        rows = list(reader)

    if len(set(header)) != len(header):
        raise IngestError(f"{path}: duplicate column names in header")
    if target not in header:
        raise IngestError(f"{path}: target column {target!r} not found in header")
    if target in override:
        raise IngestError(f"{path}: target column {target!r} cannot be categorical")
    if not rows:
        raise IngestError(f"{path}: no data rows")
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise IngestError(
                f"{path}: row {i + 1} has {len(row)} fields, expected {len(header)}")

    by_name = {name: [row[j] for row in rows] for j, name in enumerate(header)}

    # Missing-value check first so the error names the exact cell.
    for name in header:
        for i, tok in enumerate(by_name[name]):
            if tok.strip() == "":
                raise IngestError(f"{path}: missing value at row {i + 1}, column {name!r}")

    y = _parse_numeric_column(path, target, by_name[target], role="target")

    items: list[tuple[str, object]] = []
    for name in header:
        if name == target:
            continue
        tokens = by_name[name]
        if name in override:
            items.append((name, tokens))
            continue
        parsed = _try_parse_numeric(path, name, tokens)
        items.append((name, tokens if parsed is None else parsed))
    return from_arrays(items, y, response_name=target)


def _try_parse_numeric(path: str, name: str, tokens: list[str]) -> np.ndarray | None:
    out = np.empty(len(tokens), dtype=np.float64)
    for i, tok in enumerate(tokens):
        try:
            v = float(tok)
        except ValueError:
            return None
        if not math.isfinite(v):
            raise IngestError(f"{path}: non-finite value at row {i + 1}, column {name!r}")
        out[i] = v
    return out


def _parse_numeric_column(path: str, name: str, tokens: list[str], role: str) -> np.ndarray:
    parsed = _try_parse_numeric(path, name, tokens)
    if parsed is None:
        bad = next(i for i, t in enumerate(tokens) if not _is_float(t))
        raise IngestError(
            f"{path}: {role} column {name!r} is not numeric "
            f"(row {bad + 1} holds {tokens[bad]!r})")
    return parsed


def _is_float(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def format_float(v: float) -> str:
    """17-significant-digit decimal form; reparses to the identical float."""
    return format(v, ".17g")


def write_csv(dataset: Dataset, path: str) -> None:
    """Write the dataset back to CSV; numeric cells use 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.column_names()) + [dataset.response_name])
        decoded = []
        for meta, col in zip(dataset.column_meta, dataset.columns):
            if meta.kind is ColumnKind.NUMERIC:
                decoded.append([format_float(v) for v in col])
            else:
                decoded.append([meta.levels[c] for c in col])
        ys = [format_float(v) for v in dataset.response]
        for i in range(dataset.n_rows):
            writer.writerow([c[i] for c in decoded] + [ys[i]])
