"""Time-series loading, snapshot assembly and measurement-noise characterization."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateVariance,
    EmptyWindow,
    InsufficientData,
    InvalidParameter,
    IoError,
    ParseError,
    ShapeError,
)
from .numkernel import as_matrix

PROVENANCES = ("steady-window", "polynomial-detrend", "manufacturer")


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled states; ``data`` has one row per sample."""

    sample_period: float
    state_names: tuple
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = as_matrix(self.data, "time series")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "state_names", tuple(self.state_names))
        if data.shape[1] != len(self.state_names):
            raise ShapeError(
                f"{data.shape[1]} data columns but {len(self.state_names)} state names"
            )
        if not self.sample_period > 0:
            raise InvalidParameter("sample period must be positive")

    @property
    def T(self):
        return self.data.shape[0]

    @property
    def n(self):
        return self.data.shape[1]

    @property
    def times(self):
        return np.arange(self.T) * self.sample_period


@dataclass(frozen=True)
class SnapshotPair:
    """Row-snapshot matrices: ``Y[i]`` is the sample following ``X[i]``."""

    X: np.ndarray = field(repr=False)
    Y: np.ndarray = field(repr=False)

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        Y = as_matrix(self.Y, "Y")
        if X.shape != Y.shape:
            raise ShapeError(f"X {X.shape} and Y {Y.shape} differ in shape")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def m(self):
        return self.X.shape[0]

    @property
    def n(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class NoiseModel:
    """Diagonal measurement-noise covariance, stored as its variances."""

    variances: np.ndarray
    provenance: str

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.variances, dtype=float))
        if v.ndim != 1 or v.size == 0:
            raise InvalidParameter("variances must be a non-empty vector")
        if not np.all(np.isfinite(v)):
            raise InvalidParameter("variances must be finite")
        if np.any(v < 0):
            raise InvalidParameter("variances must be non-negative")
        if self.provenance not in PROVENANCES:
            raise InvalidParameter(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "variances", v)

    def __len__(self):
        return self.variances.size

    def check_length(self, n):
        if len(self) != n:
            raise ShapeError(f"noise model has {len(self)} variances, data has {n} states")

    def to_json(self):
        return {"variances": self.variances.tolist(), "provenance": self.provenance}

    @classmethod
    def from_json(cls, obj):
        return cls(np.asarray(obj["variances"], dtype=float), obj["provenance"])


def load_csv(path, time_column="time", sample_period=None) -> TimeSeries:
    """Read a comma-separated file with one header row of state names.

    A leading column named ``time_column`` is taken as the time axis and
    fixes the sample period; otherwise ``sample_period`` must be given
    (default 1 s).
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise ShapeError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    width = len(header)
    values = []
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise ShapeError(f"row {r} has {len(row)} cells, header has {width}")
        parsed = []
        for c, cell in enumerate(row, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(r, c, f"{path}: non-numeric cell {cell!r} at row {r}, column {c}") from None
        values.append(parsed)
    if not values:
        raise InsufficientData(f"{path} has no data rows")
    data = np.array(values)

    has_time = header[0].lower() == time_column
    if has_time:
        t = data[:, 0]
        data = data[:, 1:]
        header = header[1:]
        if sample_period is None:
            sample_period = float(t[1] - t[0]) if t.size > 1 else 1.0
    if sample_period is None:
        sample_period = 1.0
    if not header:
        raise ShapeError(f"{path} has no state columns")
    return TimeSeries(sample_period, header, data)


def format_csv(ts: TimeSeries, with_time=True) -> str:
    """Render ``ts`` in the format :func:`load_csv` reads, at full precision."""
    header = (["time"] if with_time else []) + list(ts.state_names)
    lines = [",".join(header)]
    for t, row in zip(ts.times, ts.data):
        cells = ([repr(float(t))] if with_time else []) + [repr(float(v)) for v in row]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_csv(ts: TimeSeries, path, with_time=True):
    path = Path(path)
    try:
        path.write_text(format_csv(ts, with_time), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


def build_snapshots(ts: TimeSeries) -> SnapshotPair:
    if ts.T < 2:
        raise InsufficientData(f"need at least 2 samples, got {ts.T}")
    return SnapshotPair(ts.data[:-1], ts.data[1:])


def _check_degenerate(var, names):
    bad = [names[k] for k in np.flatnonzero(var <= 0)]
    if bad:
        raise DegenerateVariance(f"zero variance in state(s) {', '.join(map(str, bad))}")


def variance_steady_window(ts: TimeSeries, t_start, t_end) -> NoiseModel:
    """Per-state unbiased sample variance over samples with ``t_start <= t <= t_end``."""
    t = ts.times
    # absorbs round-off in the reconstructed time axis
    eps = 1e-9 * ts.sample_period
    mask = (t >= t_start - eps) & (t <= t_end + eps)
    if mask.sum() < 2:
        raise EmptyWindow(
            f"window [{t_start}, {t_end}] s holds {int(mask.sum())} sample(s), need 2"
        )
    var = np.var(ts.data[mask], axis=0, ddof=1)
    _check_degenerate(var, ts.state_names)
    return NoiseModel(var, "steady-window")


def variance_detrend_poly(ts: TimeSeries, degree=9) -> NoiseModel:
    """Residual variance after removing a least-squares polynomial trend per state.

    The time axis is mapped onto [-1, 1] and the fit uses a Legendre basis,
    which keeps high degrees well conditioned.
    """
    degree = int(degree)
    if degree < 0:
        raise InvalidParameter("degree must be non-negative")
    if ts.T < degree + 2:
        raise InsufficientData(f"degree {degree} fit needs at least {degree + 2} samples, got {ts.T}")
    u = np.linspace(-1.0, 1.0, ts.T)
    V = np.polynomial.legendre.legvander(u, degree)
    coef, *_ = np.linalg.lstsq(V, ts.data, rcond=None)
    resid = ts.data - V @ coef
    # unbiased for the fitted model: one degree of freedom per coefficient
    var = np.sum(resid**2, axis=0) / (ts.T - degree - 1)
    scale = np.maximum(np.max(np.abs(ts.data), axis=0), 1.0)
    var = np.where(var <= (1e-10 * scale) ** 2, 0.0, var)
    _check_degenerate(var, ts.state_names)
    return NoiseModel(var, "polynomial-detrend")


def variance_manufacturer(spec) -> NoiseModel:
    v = np.atleast_1d(np.asarray(spec, dtype=float))
    if v.ndim != 1 or v.size == 0:
        raise InvalidParameter("manufacturer variances must be a non-empty vector")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise InvalidParameter("manufacturer variances must be positive")
    return NoiseModel(v, "manufacturer")


def load_noise_json(path) -> NoiseModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return NoiseModel.from_json(obj)

