"""Dataset loading, chronological splitting, standardization and windowing."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ContractError, DataError

DATASET_NAMES = ("sml2010", "nasdaq100", "energy", "eeg", "synthetic")


@dataclass
class DatasetSpec:
    name: str
    path: str = ""
    target: str = "y"
    exclude: list[str] = field(default_factory=list)
    train_size: int = 0
    test_size: int = 0
    delimiter: str = ","  # "," or "whitespace"

    def __post_init__(self):
        if self.name not in DATASET_NAMES:
            raise DataError(f"unknown dataset {self.name!r}; choose from {DATASET_NAMES}")


# Defaults for the four public datasets; paths are filled from config files.
PRESETS = {
    "sml2010": dict(
        target="Temperature_Comedor_Sensor",
        exclude=["Date", "Time", "Exterior_Entalpic_1", "Exterior_Entalpic_2", "Exterior_Entalpic_turbo"],
        train_size=2000, test_size=763, delimiter="whitespace"),
    "nasdaq100": dict(target="NDX", exclude=[], train_size=32000, test_size=8560),
    "energy": dict(target="Appliances", exclude=["date"], train_size=16000, test_size=3736),
    "eeg": dict(target="O1", exclude=[], train_size=10000, test_size=2288),
    "synthetic": dict(target="y", exclude=[]),
}


def preset(name: str, path: str = "", **overrides) -> DatasetSpec:
    kw = dict(PRESETS.get(name, {}))
    kw.update(overrides)
    return DatasetSpec(name=name, path=path, **kw)


@dataclass
class Table:
    """Cleaned numeric table: exogenous columns plus one target column."""
    frame: pd.DataFrame
    target: str

    @property
    def exog_columns(self) -> list[str]:
        return [c for c in self.frame.columns if c != self.target]

    @property
    def n_exog(self) -> int:
        return len(self.exog_columns)

    def __len__(self) -> int:
        return len(self.frame)


def _clean_header(tokens: list[str]) -> list[str]:
    # SML2010 headers look like "#  1:Date 2:Time 3:Temperature_Comedor_Sensor ..."
    out = []
    for tok in tokens:
        tok = tok.strip().lstrip("#").strip()
        tok = re.sub(r"^\d+:", "", tok)
        if tok:
            out.append(tok)
    return out


def read_csv(path: str | Path, delimiter: str = ",") -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    if delimiter == "whitespace":
        with open(path) as fh:
            header = _clean_header(fh.readline().split())
        frame = pd.read_csv(path, sep=r"\s+", header=None, skiprows=1, float_precision="round_trip")
        if frame.shape[1] != len(header):
            raise DataError(f"{path}: header has {len(header)} names but rows have {frame.shape[1]} fields")
        frame.columns = header
        return frame
    frame = pd.read_csv(path, sep=delimiter, float_precision="round_trip")
    frame.columns = _clean_header([str(c) for c in frame.columns])
    return frame


def clean(frame: pd.DataFrame, target: str, exclude=()) -> Table:
    """Drop excluded columns, coerce to float and fill missing values.

    Interior gaps are linearly interpolated; leading/trailing gaps take the
    nearest present value.
    """
    if target not in frame.columns:
        raise DataError(f"target column {target!r} not found (have {list(frame.columns)})")
    frame = frame.drop(columns=[c for c in exclude if c in frame.columns])
    out = {}
    for col in frame.columns:
        values = pd.to_numeric(frame[col], errors="coerce").astype(np.float64)
        if values.isna().all():
            raise DataError(f"column {col!r} has no numeric values")
        if values.isna().any():
            values = values.interpolate(method="linear", limit_area="inside").ffill().bfill()
        out[col] = values.to_numpy()
    cols = [c for c in frame.columns if c != target] + [target]
    return Table(pd.DataFrame({c: out[c] for c in cols}), target)


def load(spec: DatasetSpec) -> Table:
    frame = read_csv(spec.path, spec.delimiter)
    return clean(frame, spec.target, spec.exclude)


# ---------------------------------------------------------------------------
# splitting and standardization


@dataclass
class StandardizationStats:
    columns: list[str]
    mean: np.ndarray
    std: np.ndarray

    def transform(self, frame: pd.DataFrame) -> pd.DataFrame:
        values = (frame[self.columns].to_numpy(dtype=np.float64) - self.mean) / self.std
        return pd.DataFrame(values, columns=self.columns, index=frame.index)

    def target_scale(self, target: str) -> tuple[float, float]:
        i = self.columns.index(target)
        return float(self.mean[i]), float(self.std[i])

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationStats":
        return cls(list(d["columns"]), np.asarray(d["mean"], dtype=np.float64),
                   np.asarray(d["std"], dtype=np.float64))


def fit_stats(frame: pd.DataFrame) -> StandardizationStats:
    """Per-column mean and population standard deviation."""
    values = frame.to_numpy(dtype=np.float64)
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    for col, s in zip(frame.columns, std):
        if not s > 0:
            raise DataError(f"column {col!r} is constant on the training rows")
    return StandardizationStats(list(frame.columns), mean, std)


def split_and_standardize(table: Table, train_size: int, test_size: int):
    """Chronological split and z-scoring with training statistics.

    Returns ``(train_table, test_table, stats)``.  The test split keeps its
    original row index so window origins refer to source rows.
    """
    if train_size < 1 or test_size < 1:
        raise ContractError("train and test sizes must be positive")
    if train_size + test_size > len(table):
        raise DataError(f"split {train_size}+{test_size} exceeds {len(table)} rows")
    train = table.frame.iloc[:train_size]
    test = table.frame.iloc[train_size:train_size + test_size]
    stats = fit_stats(train)
    return Table(stats.transform(train), table.target), Table(stats.transform(test), table.target), stats


# ---------------------------------------------------------------------------
# windows


@dataclass
class WindowSample:
    X: np.ndarray       # [n, T]
    Y: np.ndarray       # [T]
    future: np.ndarray  # [horizon]
    origin: int         # source row of the last observed target


@dataclass
class WindowSet:
    """Stride-1 supervised windows stored as stacked arrays."""
    X: np.ndarray       # [N, n, T]
    Y: np.ndarray       # [N, T]
    future: np.ndarray  # [N, horizon]
    origin: np.ndarray  # [N]

    def __len__(self) -> int:
        return len(self.origin)

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return WindowSample(self.X[i], self.Y[i], self.future[i], int(self.origin[i]))
        return WindowSet(self.X[i], self.Y[i], self.future[i], self.origin[i])

    @property
    def window(self) -> int:
        return self.X.shape[2]

    @property
    def horizon(self) -> int:
        return self.future.shape[1]

    @property
    def n_exog(self) -> int:
        return self.X.shape[1]


def window_count(rows: int, window: int, horizon: int) -> int:
    return rows - window - horizon + 1


def make_windows(table: Table, window: int, horizon: int) -> WindowSet:
    rows = len(table)
    if window < 1 or horizon < 1:
        raise ContractError("window and horizon must be positive")
    if window + horizon > rows:
        raise ContractError(f"{rows} rows cannot hold window {window} + horizon {horizon}")
    exog = table.frame[table.exog_columns].to_numpy(dtype=np.float64)
    target = table.frame[table.target].to_numpy(dtype=np.float64)
    count = window_count(rows, window, horizon)
    # sliding_window_view returns [count, features, window]
    X = np.lib.stride_tricks.sliding_window_view(exog, window, axis=0)[:count].copy()
    Y = np.lib.stride_tricks.sliding_window_view(target, window)[:count].copy()
    F = np.lib.stride_tricks.sliding_window_view(target[window:], horizon)[:count].copy()
    start = int(table.frame.index[0]) if rows else 0
    origin = start + np.arange(count) + window - 1
    return WindowSet(X, Y, F, origin)


# ---------------------------------------------------------------------------
# synthetic data


def synthesize(n: int, rows: int, sparsity: int, seed: int = 2019, noise: float = 0.01,
               coefficients=None):
    """AR(1) exogenous series with a target driven by ``sparsity`` of them at lag 1.

    Returns ``(table, informative, coefficients)``, where ``informative`` lists
    the indices of the series that drive the target.
    """
    if not 1 <= sparsity <= n:
        raise ContractError(f"sparsity must lie in [1, {n}], got {sparsity}")
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.5, 0.95, size=n)
    eps = rng.normal(size=(rows, n)) * np.sqrt(1.0 - phi ** 2)
    x = np.empty((rows, n))
    x[0] = rng.normal(size=n)
    for t in range(1, rows):
        x[t] = phi * x[t - 1] + eps[t]
    informative = np.sort(rng.choice(n, size=sparsity, replace=False))
    if coefficients is None:
        coefficients = rng.uniform(0.5, 1.5, size=sparsity) * rng.choice([-1.0, 1.0], size=sparsity)
    coefficients = np.asarray(coefficients, dtype=np.float64)
    y = np.empty(rows)
    y[0] = 0.0
    y[1:] = x[:-1, informative] @ coefficients
    y += noise * rng.normal(size=rows)
    frame = pd.DataFrame(x, columns=[f"x{k}" for k in range(n)])
    frame["y"] = y
    return Table(frame, "y"), informative, coefficients
