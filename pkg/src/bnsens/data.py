"""Loading, discretizing, imputing and encoding tabular data.

The end product is a :class:`CategoricalDataset`: an ``N x n`` matrix of
integer value codes together with the arity of every variable.  Continuous
columns are cut into equal-width bins, missing cells are filled by drawing
from the column's empirical distribution, and category tokens are coded in
order of first appearance.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataFormatError, PreprocessError

MISSING = None
MISSING_TOKENS = frozenset({"?", ""})
SCHEMA_VERSION = 1

_DECIMAL = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


@dataclass
class RawTable:
    """Parsed but untyped table.

    Each cell is a ``float`` (numeric field), a ``str`` (category token) or
    ``None`` (missing).
    """

    column_names: list[str]
    cells: list[list[float | str | None]]

    def __post_init__(self):
        if not self.column_names:
            raise DataFormatError("table has no columns")
        if not self.cells:
            raise DataFormatError("table has no rows")
        n = len(self.column_names)
        for lineno, row in enumerate(self.cells, start=2):
            if len(row) != n:
                raise DataFormatError(
                    f"row {lineno} has {len(row)} fields, expected {n}")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.cells), len(self.column_names)

    def column(self, index: int) -> list[float | str | None]:
        return [row[index] for row in self.cells]


@dataclass(frozen=True)
class CategoricalDataset:
    """Immutable matrix of value codes, ``0 <= data[:, i] < arities[i]``."""

    data: np.ndarray
    arities: tuple[int, ...]
    column_names: tuple[str, ...] = ()

    def __post_init__(self):
        data = np.array(self.data, dtype=np.int64, copy=True)
        if data.ndim != 2:
            raise ValueError("data must be a 2-d array")
        arities = tuple(int(r) for r in self.arities)
        if len(arities) != data.shape[1]:
            raise ValueError(
                f"{len(arities)} arities given for {data.shape[1]} columns")
        if any(r < 1 for r in arities):
            raise ValueError("arities must be >= 1")
        if data.size:
            if data.min() < 0 or np.any(data.max(axis=0) >= np.array(arities)):
                raise ValueError("value code out of range for its arity")
        names = tuple(self.column_names) or tuple(f"V{i}" for i in range(data.shape[1]))
        if len(names) != data.shape[1]:
            raise ValueError("column_names length does not match data")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "arities", arities)
        object.__setattr__(self, "column_names", names)

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_vars(self) -> int:
        return self.data.shape[1]

    def index_of(self, name_or_index: str | int) -> int:
        """Resolve a column name or a stringified index to a column index."""
        if isinstance(name_or_index, (int, np.integer)):
            idx = int(name_or_index)
        elif name_or_index in self.column_names:
            return self.column_names.index(name_or_index)
        elif str(name_or_index).lstrip("-").isdigit():
            idx = int(name_or_index)
        else:
            raise KeyError(f"unknown variable {name_or_index!r}")
        if not 0 <= idx < self.n_vars:
            raise KeyError(f"variable index {idx} out of range")
        return idx

    def take_rows(self, order: Sequence[int]) -> "CategoricalDataset":
        return CategoricalDataset(self.data[np.asarray(order, dtype=np.int64)],
                                  self.arities, self.column_names)

    def __eq__(self, other):
        if not isinstance(other, CategoricalDataset):
            return NotImplemented
        return (self.arities == other.arities
                and self.column_names == other.column_names
                and np.array_equal(self.data, other.data))

    __hash__ = None


@dataclass(frozen=True)
class ColumnOverride:
    """Per-column preprocessing override.

    ``kind`` is ``"numeric"``, ``"categorical"``, ``"code"`` (values are
    already integer codes and are kept verbatim) or ``None`` (auto-detect).
    """

    arity: int | None = None
    kind: str | None = None

    def __post_init__(self):
        if self.kind not in (None, "numeric", "categorical", "code"):
            raise ValueError(f"unknown column kind {self.kind!r}")
        if self.arity is not None and self.arity < 1:
            raise ValueError("forced arity must be >= 1")


@dataclass(frozen=True)
class PreprocessSpec:
    bins: int = 3
    seed: int | None = None
    overrides: dict[str, ColumnOverride] = field(default_factory=dict)

    def __post_init__(self):
        if self.bins < 1:
            raise ValueError("bins must be >= 1")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @classmethod
    def for_codes(cls, dataset: CategoricalDataset) -> "PreprocessSpec":
        """Spec under which ``encode`` reproduces an encoded dataset verbatim."""
        return cls(overrides={
            name: ColumnOverride(arity=r, kind="code")
            for name, r in zip(dataset.column_names, dataset.arities)})

    def to_dict(self) -> dict:
        return {"bins": self.bins, "seed": self.seed,
                "overrides": {k: {"arity": v.arity, "kind": v.kind}
                              for k, v in sorted(self.overrides.items())}}


def _parse_field(text: str) -> float | str | None:
    text = text.strip()
    if text in MISSING_TOKENS:
        return MISSING
    if _DECIMAL.match(text):
        return float(text)
    return text


def load_csv(path: str | Path) -> RawTable:
    """Read a comma separated file with a header line into a :class:`RawTable`."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = []
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip() and len(header) > 1):
                continue  # blank line
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}: line {reader.line_num} has {len(row)} fields, "
                    f"expected {len(header)}")
            rows.append([_parse_field(f) for f in row])
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return RawTable(header, rows)


def discretize_equal_width(column: Sequence[float | None], bins: int
                           ) -> tuple[list[int | None], np.ndarray]:
    """Cut numeric values into ``bins`` equal-width bins over ``[min, max]``.

    Bins are half-open except the last one, which also holds ``max``.  A
    constant column maps entirely to bin 0.  Missing cells stay missing.

    Returns
    -------
    codes : list
        Bin index per cell, ``None`` for missing cells.
    edges : ndarray
        The ``bins + 1`` bin edges.
    """
    if bins < 1:
        raise PreprocessError("bins must be >= 1")
    observed = np.array([v for v in column if v is not MISSING], dtype=float)
    if observed.size == 0:
        raise PreprocessError("column has no numeric values")
    lo, hi = float(observed.min()), float(observed.max())
    if hi == lo:
        return [MISSING if v is MISSING else 0 for v in column], np.array([lo, hi])
    width = (hi - lo) / bins
    edges = lo + width * np.arange(bins + 1)
    edges[-1] = hi
    codes = []
    for v in column:
        if v is MISSING:
            codes.append(MISSING)
        else:
            codes.append(min(int(np.floor((v - lo) / width)), bins - 1))
    return codes, edges


def _column_rng(seed: int, column_index: int) -> np.random.Generator:
    # PCG64 stream keyed by (seed, column) so columns are independent
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, column_index])))


def impute_random(column: Sequence[int | None], seed: int, column_index: int = 0,
                  counts: Sequence[int] | None = None) -> list[int]:
    """Replace missing codes by draws from the empirical code distribution.

    Draws use PCG64 seeded with ``SeedSequence([seed, column_index])``; each
    missing cell takes ``u = floor(U * total)`` for a uniform double ``U``
    and picks the code whose cumulative count first exceeds ``u``.
    """
    column = list(column)
    if all(v is not MISSING for v in column):
        return column
    if counts is None:
        observed = [v for v in column if v is not MISSING]
        if not observed:
            raise PreprocessError("all cells missing, nothing to impute from")
        counts = np.bincount(observed)
    cum = np.cumsum(np.asarray(counts, dtype=np.int64))
    total = int(cum[-1]) if cum.size else 0
    if total == 0:
        raise PreprocessError("all cells missing, nothing to impute from")
    rng = _column_rng(seed, column_index)
    out = []
    for v in column:
        if v is MISSING:
            u = int(rng.random() * total)
            v = int(np.searchsorted(cum, u, side="right"))
        out.append(v)
    return out


def _token_text(v: float | str) -> str:
    if isinstance(v, float):
        return str(int(v)) if v.is_integer() else repr(v)
    return v


def _encode_column(values: list, kind: str | None, bins: int, forced_arity: int | None
                   ) -> tuple[list[int | None], int]:
    observed = [v for v in values if v is not MISSING]
    if not observed:
        raise PreprocessError("all cells missing")
    if kind is None:
        kind = "numeric" if all(isinstance(v, float) for v in observed) else "categorical"

    if kind == "code":
        codes = []
        for v in values:
            if v is MISSING:
                codes.append(MISSING)
                continue
            if not (isinstance(v, float) and v.is_integer() and v >= 0):
                raise PreprocessError(f"value {v!r} is not a non-negative integer code")
            codes.append(int(v))
        arity = max(c for c in codes if c is not MISSING) + 1
        if forced_arity is not None and forced_arity < arity:
            raise PreprocessError(f"code {arity - 1} exceeds forced arity {forced_arity}")
        return codes, forced_arity if forced_arity is not None else arity

    if kind == "numeric":
        if not all(isinstance(v, float) for v in observed):
            raise PreprocessError("non-numeric value in numeric column")
        bin_codes, _ = discretize_equal_width(values, bins)
        # compact to observed bins, keeping bin order
        used = sorted({c for c in bin_codes if c is not MISSING})
        remap = {c: i for i, c in enumerate(used)}
        codes = [MISSING if c is MISSING else remap[c] for c in bin_codes]
    else:
        remap = {}
        codes = []
        for v in values:
            if v is MISSING:
                codes.append(MISSING)
                continue
            tok = _token_text(v)
            codes.append(remap.setdefault(tok, len(remap)))
    arity = len(set(c for c in codes if c is not MISSING))
    if forced_arity is not None:
        if forced_arity < arity:
            raise PreprocessError(
                f"forced arity {forced_arity} is below the {arity} observed values")
        arity = forced_arity
    return codes, arity


def encode(table: RawTable, spec: PreprocessSpec | None = None) -> CategoricalDataset:
    """Turn a raw table into a categorical dataset.

    Numeric columns are discretized, token columns are coded in order of
    first appearance, and missing cells are imputed afterwards.  Errors carry
    the offending column name.
    """
    spec = spec or PreprocessSpec()
    unknown = set(spec.overrides) - set(table.column_names)
    if unknown:
        raise PreprocessError(f"overrides name unknown columns: {sorted(unknown)}")
    n_rows, n_cols = table.shape
    codes = np.empty((n_rows, n_cols), dtype=np.int64)
    arities = []
    for i, name in enumerate(table.column_names):
        ov = spec.overrides.get(name, ColumnOverride())
        try:
            col, arity = _encode_column(table.column(i), ov.kind, spec.bins, ov.arity)
            if any(c is MISSING for c in col):
                if spec.seed is None:
                    raise PreprocessError("missing values present but no seed given")
                col = impute_random(col, spec.seed, i)
        except PreprocessError as exc:
            raise PreprocessError(f"column {name!r}: {exc}", column=name) from exc
        codes[:, i] = col
        arities.append(arity)
    return CategoricalDataset(codes, tuple(arities), tuple(table.column_names))


def dataset_to_raw(dataset: CategoricalDataset) -> RawTable:
    return RawTable(list(dataset.column_names),
                    [[float(v) for v in row] for row in dataset.data.tolist()])


def write_encoded(dataset: CategoricalDataset, csv_path: str | Path,
                  spec: PreprocessSpec | None = None) -> Path:
    """Write codes as CSV plus a JSON sidecar (same stem) describing them."""
    from .io import atomic_write_text

    csv_path = Path(csv_path)
    lines = [",".join(dataset.column_names)]
    lines += [",".join(map(str, row)) for row in dataset.data.tolist()]
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "arities": list(dataset.arities),
        "names": list(dataset.column_names),
        "bins": spec.bins if spec else None,
        "seed": spec.seed if spec else None,
    }
    side_path = csv_path.with_suffix(".json")
    atomic_write_text(side_path, json.dumps(sidecar, indent=2) + "\n")
    return side_path


def sidecar_path(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def read_encoded(csv_path: str | Path) -> CategoricalDataset:
    """Load a dataset previously written by :func:`write_encoded`."""
    csv_path = Path(csv_path)
    try:
        meta = json.loads(sidecar_path(csv_path).read_text())
        arities, names = meta["arities"], meta["names"]
    except (KeyError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{sidecar_path(csv_path)}: bad sidecar ({exc})") from exc
    table = load_csv(csv_path)
    if list(table.column_names) != list(names):
        raise DataFormatError("sidecar names do not match the CSV header")
    spec = PreprocessSpec(overrides={
        n: ColumnOverride(arity=r, kind="code") for n, r in zip(names, arities)})
    return encode(table, spec)


def load_dataset(path: str | Path, spec: PreprocessSpec | None = None) -> CategoricalDataset:
    """Load an encoded dataset if it has a sidecar, otherwise preprocess a raw CSV."""
    side = sidecar_path(path)
    if side.exists():
        try:
            meta = json.loads(side.read_text())
        except json.JSONDecodeError:
            meta = {}
        if isinstance(meta, dict) and "arities" in meta:
            return read_encoded(path)
    return encode(load_csv(path), spec)


def from_columns(columns: Iterable[Sequence[int]], arities: Sequence[int] | None = None,
                 names: Sequence[str] = ()) -> CategoricalDataset:
    """Build a dataset from integer columns; arities default to ``max + 1``."""
    data = np.column_stack([np.asarray(c, dtype=np.int64) for c in columns])
    if arities is None:
        arities = [int(c.max()) + 1 for c in data.T]
    return CategoricalDataset(data, tuple(arities), tuple(names))
