"""CSV ingestion and the test-score transformation pipeline.

The default column layout expects one row per pupil with::

    y3, y2, y1   grade-3/2/1 test scores (math + reading)
    small        1 if assigned to a small class at kindergarten, else 0
    blk, boy     dummies
    expi         grade-3 teacher experience in years (log1p-transformed)
    lunch        grade-3 free-lunch eligibility dummy

Any other layout can be described with a :class:`ColumnSpec` (or a JSON file
with the same keys).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from .designs import Dataset
from .errors import (
    DataError,
    DegenerateInstrument,
    DegenerateMediator,
    EmptyAfterFiltering,
    EmptyInput,
    MissingColumn,
    ParseError,
)

log = logging.getLogger(__name__)

TRANSFORMS = ("none", "log1p", "standardize")
NA_TOKENS = frozenset({"", "na", "nan", "n/a", "null", "."})
QUANTILES = (0.1, 0.3, 0.5, 0.7, 0.9)


@dataclass(frozen=True)
class ColumnSpec:
    outcome: str = "y3"
    treatment: str = "small"
    mediator_source: str = "y2"
    instrument_source: str = "y1"
    covariates: tuple[str, ...] = ("blk", "boy", "expi", "lunch")
    transforms: dict[str, str] = field(default_factory=lambda: {"expi": "log1p"})
    standardize_outcome: bool = True

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "transforms", dict(self.transforms))
        names = self.columns
        if len(set(names)) != len(names):
            raise ValueError(f"column names must be distinct, got {names}")
        for col, how in self.transforms.items():
            if how not in TRANSFORMS:
                raise ValueError(f"unknown transform {how!r} for {col!r}; choose from {TRANSFORMS}")
            if col not in self.covariates:
                raise ValueError(f"transform given for {col!r}, which is not a covariate")

    @property
    def columns(self) -> tuple[str, ...]:
        return (
            self.outcome,
            self.treatment,
            self.mediator_source,
            self.instrument_source,
            *self.covariates,
        )

    @classmethod
    def from_dict(cls, raw: dict) -> "ColumnSpec":
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown column-spec keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "ColumnSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["covariates"] = list(self.covariates)
        return out


@dataclass(frozen=True)
class QuantileRule:
    """Indicator ``1[q_p(source) < source]``."""

    p: float
    source: str

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")

    def apply(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return (empirical_quantile(values, self.p) < values).astype(float)


@dataclass(frozen=True)
class RawTable:
    frame: pd.DataFrame
    dropped: int
    spec: ColumnSpec
    source: str = ""

    @property
    def n(self) -> int:
        return len(self.frame)


def load_csv(path, spec: ColumnSpec | None = None) -> RawTable:
    """Read the referenced columns of a CSV file as floats.

    Rows with a blank or NA-like value in any referenced column are dropped
    (listwise deletion) and counted in ``RawTable.dropped``.
    """
    spec = spec or ColumnSpec()
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    raw.columns = [c.strip() for c in raw.columns]
    missing = [c for c in spec.columns if c not in raw.columns]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {missing}")

    data = {}
    keep = np.ones(len(raw), dtype=bool)
    for col in spec.columns:
        text = raw[col].str.strip()
        is_na = text.str.lower().isin(NA_TOKENS).to_numpy()
        values = pd.to_numeric(text.where(~is_na), errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~is_na & ~np.isfinite(values))
        if bad.size:
            i = int(bad[0])
            # data rows start on line 2 of the file
            raise ParseError(i + 2, col, raw[col].iloc[i])
        keep &= ~is_na
        data[col] = values

    frame = pd.DataFrame(data)[list(spec.columns)].loc[keep].reset_index(drop=True)
    dropped = int((~keep).sum())
    if dropped:
        log.info("%s: dropped %d row(s) with missing values", path, dropped)
    if frame.empty:
        raise EmptyAfterFiltering(f"{path}: no complete rows remain after dropping missing values")
    return RawTable(frame, dropped, spec, str(path))


def write_csv(table: RawTable, path) -> None:
    table.frame.to_csv(path, index=False)


def empirical_quantile(values, p: float) -> float:
    """Lower empirical quantile.

    The smallest observed value ``v`` with ``#{values <= v} / n >= p``.
    """
    v = np.sort(np.asarray(values, dtype=float).reshape(-1))
    n = v.shape[0]
    if n == 0:
        raise EmptyInput("cannot take a quantile of an empty sample")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    hit = np.arange(1, n + 1) / n >= p
    return float(v[int(np.argmax(hit))])


def _transform(values: np.ndarray, how: str) -> np.ndarray:
    if how == "log1p":
        if np.any(values <= -1):
            raise DataError("log1p transform needs values > -1")
        return np.log1p(values)
    if how == "standardize":
        sd = values.std(ddof=1)
        if not sd > 0:
            raise DataError("cannot standardize a constant column")
        return (values - values.mean()) / sd
    return values


def build_dataset(table: RawTable, p: float | None = None) -> Dataset:
    """Turn a loaded table into a :class:`Dataset`.

    With ``p`` given, ``M`` and ``Z`` are the quantile indicators of the
    mediator and instrument source columns; with ``p=None`` those columns must
    already be binary.  The outcome is divided by its sample SD (``n-1``
    denominator) unless ``spec.standardize_outcome`` is false.
    """
    spec = table.spec
    f = table.frame
    y = f[spec.outcome].to_numpy(dtype=float)
    if spec.standardize_outcome:
        sd = y.std(ddof=1)
        if not sd > 0:
            raise DataError(f"outcome {spec.outcome!r} is constant")
        y = y / sd
    msrc = f[spec.mediator_source].to_numpy(dtype=float)
    zsrc = f[spec.instrument_source].to_numpy(dtype=float)
    if p is None:
        for col, v in ((spec.mediator_source, msrc), (spec.instrument_source, zsrc)):
            if not np.all((v == 0) | (v == 1)):
                raise DataError(f"{col!r} must be coded 0/1 when no quantile p is given")
        m, z = msrc, zsrc
    else:
        m = QuantileRule(p, spec.mediator_source).apply(msrc)
        z = QuantileRule(p, spec.instrument_source).apply(zsrc)
    if np.all(m == m[0]):
        raise DegenerateMediator(f"mediator from {spec.mediator_source!r} is constant (p={p})")
    if np.all(z == z[0]):
        raise DegenerateInstrument(f"instrument from {spec.instrument_source!r} is constant (p={p})")
    cols = [np.ones(len(f))]
    for c in spec.covariates:
        cols.append(_transform(f[c].to_numpy(dtype=float), spec.transforms.get(c, "none")))
    names = ("const",) + tuple(
        c if spec.transforms.get(c, "none") == "none" else f"{spec.transforms[c]}({c})"
        for c in spec.covariates
    )
    d = f[spec.treatment].to_numpy(dtype=float)
    if not np.all((d == 0) | (d == 1)):
        raise DataError(f"treatment {spec.treatment!r} must be coded 0/1")
    return Dataset(
        y=y, d=d, m=m, z=z, x=np.column_stack(cols), x_names=names,
        meta={"p": p, "source": table.source, "dropped": table.dropped},
    )


def build_star_dataset(table: RawTable, p: float) -> Dataset:
    """Grade-3 score decomposition data: quantile-binarised grade-2/grade-1 scores."""
    return build_dataset(table, p)
