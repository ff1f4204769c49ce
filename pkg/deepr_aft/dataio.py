"""Dataset files, model files and result tables."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from deepr_aft.constants import MAX_SPLIT_ATTEMPTS, MODEL_FORMAT_VERSION, MODEL_MAGIC
from deepr_aft.core import SurvivalDataset
from deepr_aft.errors import (
    DegenerateSplitError, EmptyDataError, InvalidArgumentError, ModelFormatError, SchemaError,
)
from deepr_aft.net import LayerSpec, NetworkParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ColumnSpec:
    """Maps the columns of a CSV file onto a survival dataset.

    Args:
        time_column: Observed time column.
        event_column: Event indicator column (nonzero means failure).
        covariate_columns: Ordered covariate columns.
        categorical: Column name to ordered levels; the first level is the
            reference and gets no indicator column.
        binary_columns: Numeric 0/1 covariates that are never standardized.
    """

    time_column: str
    event_column: str
    covariate_columns: Tuple[str, ...]
    categorical: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    binary_columns: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "covariate_columns", tuple(self.covariate_columns))
        object.__setattr__(self, "binary_columns", tuple(self.binary_columns))
        object.__setattr__(self, "categorical", {k: tuple(str(v) for v in levels) for k, levels in self.categorical.items()})
        covariates = set(self.covariate_columns)
        if self.time_column in covariates or self.event_column in covariates:
            raise SchemaError("time and event columns cannot also be covariates")
        for name, levels in self.categorical.items():
            if name not in covariates:
                raise SchemaError(f"categorical column '{name}' is not a covariate")
            if not levels:
                raise SchemaError(f"categorical column '{name}' needs a declared level ordering")

    @property
    def columns(self) -> List[str]:
        return [self.time_column, self.event_column, *self.covariate_columns]

    def to_dict(self) -> dict:
        return {
            "time_column": self.time_column,
            "event_column": self.event_column,
            "covariate_columns": list(self.covariate_columns),
            "categorical": {k: list(v) for k, v in self.categorical.items()},
            "binary_columns": list(self.binary_columns),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ColumnSpec":
        return cls(data["time_column"], data["event_column"], tuple(data["covariate_columns"]),
                   {k: tuple(v) for k, v in data.get("categorical", {}).items()},
                   tuple(data.get("binary_columns", ())))


# Column names follow the R `survival` package exports of flchain and nwtco.
FLCHAIN_SPEC = ColumnSpec(
    time_column="futime",
    event_column="death",
    covariate_columns=("age", "sex", "sample.yr", "kappa", "lambda", "flc.grp", "creatinine", "mgus"),
    categorical={"sex": ("F", "M"), "flc.grp": tuple(str(k) for k in range(1, 11))},
    binary_columns=("mgus",),
)

NWTCO_SPEC = ColumnSpec(
    time_column="edrel",
    event_column="rel",
    covariate_columns=("instit", "histol", "stage", "study", "age"),
    categorical={"instit": ("1", "2"), "histol": ("1", "2"), "stage": ("1", "2", "3", "4"), "study": ("3", "4")},
)

DATASET_SPECS = {"flchain": FLCHAIN_SPEC, "nwtco": NWTCO_SPEC}


class LoadReport(NamedTuple):
    raw_rows: int
    loaded_rows: int
    dropped_missing: int
    dropped_nonpositive: int

    @property
    def dropped(self) -> int:
        return self.dropped_missing + self.dropped_nonpositive


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Zero-mean, unit-variance transform of selected covariate columns."""

    columns: Tuple[int, ...]
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, dataset: SurvivalDataset) -> "Standardizer":
        columns = tuple(k for k, flag in enumerate(dataset.continuous) if flag)
        block = dataset.covariates[:, list(columns)]
        mean = block.mean(axis=0) if len(block) else np.zeros(len(columns))
        scale = block.std(axis=0) if len(block) else np.ones(len(columns))
        scale = np.where(scale > 0, scale, 1.0)
        return cls(columns, mean, scale)

    def transform(self, covariates: np.ndarray) -> np.ndarray:
        X = np.array(covariates, dtype=float)
        if self.columns:
            cols = list(self.columns)
            X[:, cols] = (X[:, cols] - self.mean) / self.scale
        return X

    def apply(self, dataset: SurvivalDataset) -> SurvivalDataset:
        return dataset.with_covariates(self.transform(dataset.covariates), scaler=self)

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Standardizer":
        return cls(tuple(data["columns"]), np.asarray(data["mean"], dtype=float), np.asarray(data["scale"], dtype=float))


def _numeric_column(frame: pd.DataFrame, column: str, path) -> np.ndarray:
    try:
        return pd.to_numeric(frame[column], errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"column '{column}' in {path} has a non-numeric value: {exc}") from exc


def load_csv(path, spec: ColumnSpec, standardize: bool = False, return_report: bool = False):
    """Reads a survival dataset from a CSV file with a header row.

    Rows with a missing value in any selected column, or with a
    non-positive time, are dropped and counted. Categorical columns are
    one-hot encoded in their declared level order with the first level as
    reference.

    Args:
        path: CSV file path.
        spec: Column mapping.
        standardize: Standardize continuous covariates using this file's
            moments (the fitted transform is kept on ``dataset.scaler``).
        return_report: Also return a :class:`LoadReport`.

    Raises:
        SchemaError: If a column is missing or a categorical value is undeclared.
        EmptyDataError: If no rows survive filtering.
    """
    frame = pd.read_csv(path, dtype={name: str for name in spec.categorical})
    missing = [c for c in spec.columns if c not in frame.columns]
    if missing:
        raise SchemaError(f"missing column(s) in {path}: {', '.join(missing)}")

    raw_rows = len(frame)
    frame = frame[spec.columns].dropna()
    dropped_missing = raw_rows - len(frame)
    time = _numeric_column(frame, spec.time_column, path)
    positive = time > 0
    dropped_nonpositive = int((~positive).sum())
    frame = frame[positive]
    report = LoadReport(raw_rows, len(frame), dropped_missing, dropped_nonpositive)
    logger.info("loaded %d of %d rows from %s (%d missing, %d non-positive time)",
                report.loaded_rows, raw_rows, path, dropped_missing, dropped_nonpositive)
    if frame.empty:
        raise EmptyDataError(f"no usable rows in {path}")

    blocks, names, continuous = [], [], []
    for column in spec.covariate_columns:
        if column in spec.categorical:
            levels = spec.categorical[column]
            values = frame[column].astype(str).str.strip()
            unknown = sorted(set(values) - set(levels))
            if unknown:
                raise SchemaError(f"column '{column}' has undeclared level(s): {', '.join(unknown)}")
            for level in levels[1:]:
                blocks.append((values == level).to_numpy(dtype=float))
                names.append(f"{column}={level}")
                continuous.append(False)
        else:
            blocks.append(_numeric_column(frame, column, path))
            names.append(column)
            continuous.append(column not in spec.binary_columns)

    covariates = np.column_stack(blocks) if blocks else np.zeros((len(frame), 0))
    event = _numeric_column(frame, spec.event_column, path) != 0
    dataset = SurvivalDataset(time[positive], event, covariates,
                              covariate_names=tuple(names), continuous=tuple(continuous))
    if standardize:
        dataset = Standardizer.fit(dataset).apply(dataset)
    if return_report:
        return dataset, report
    return dataset


def save_dataset_csv(dataset: SurvivalDataset, path, time_column: str = "time", event_column: str = "event") -> ColumnSpec:
    """Writes a dataset in the CSV schema :func:`load_csv` reads, and returns that schema."""
    names = dataset.covariate_names or tuple(f"x{k + 1}" for k in range(dataset.p))
    frame = pd.DataFrame(dataset.covariates, columns=list(names))
    frame.insert(0, event_column, dataset.event.astype(int))
    frame.insert(0, time_column, dataset.observed_time)
    frame.to_csv(path, index=False)
    return ColumnSpec(time_column, event_column, tuple(names))


def split_train_test(dataset: SurvivalDataset, fraction: float, seed: int,
                     standardize: bool = True) -> Tuple[SurvivalDataset, SurvivalDataset]:
    """Random row split into training and test parts.

    The standardizer, when used, is fitted on the training rows only and
    applied to both parts. Splits whose training part holds no event are
    redrawn, up to a fixed number of attempts.

    Raises:
        InvalidArgumentError: If ``fraction`` is not strictly between 0 and 1.
        DegenerateSplitError: If every attempt leaves the training part without events.
    """
    if not 0.0 < fraction < 1.0:
        raise InvalidArgumentError(f"fraction must lie strictly between 0 and 1, got {fraction}")
    n = dataset.n
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    if n_train < 1:
        raise InvalidArgumentError("dataset is too small to split")
    rng = np.random.default_rng(seed)
    for attempt in range(1, MAX_SPLIT_ATTEMPTS + 1):
        order = rng.permutation(n)
        train_idx = np.sort(order[:n_train])
        if dataset.event[train_idx].any():
            break
        logger.warning("split attempt %d put no events in the training part; resampling", attempt)
    else:
        raise DegenerateSplitError(f"no split with training events after {MAX_SPLIT_ATTEMPTS} attempts")
    test_idx = np.sort(order[n_train:])
    train, test = dataset.subset(train_idx), dataset.subset(test_idx)
    if standardize and any(dataset.continuous):
        scaler = Standardizer.fit(train)
        train, test = scaler.apply(train), scaler.apply(test)
    return train, test


RESULT_KEY_COLUMNS = ["mean_kind", "error_dist", "tau", "noise_dims", "config_hash", "seed"]


def results_frame(results: Sequence) -> pd.DataFrame:
    """One row per (mean function, error law, tau, noise dimensions); one MSE and one C-index column per method and n."""
    rows: Dict[tuple, dict] = {}
    for result in results:
        scenario = result.scenario
        key = (scenario.mean_kind, scenario.error_dist, float(scenario.tau), scenario.noise_dims)
        row = rows.setdefault(key, {
            "mean_kind": scenario.mean_kind,
            "error_dist": scenario.error_dist,
            "tau": float(scenario.tau),
            "noise_dims": scenario.noise_dims,
            "config_hash": result.config_hash,
            "seed": result.seed,
        })
        for method, summary in result.methods.items():
            row[f"{method}_n{scenario.n_train}_mse"] = summary.mean_mse
            row[f"{method}_n{scenario.n_train}_cindex"] = summary.mean_cindex
    if not rows:
        return pd.DataFrame(columns=RESULT_KEY_COLUMNS)
    return pd.DataFrame(list(rows.values()))


def emit_results(results: Sequence, path, fmt: str = "csv") -> Path:
    """Writes scenario results as CSV or as an aligned plain-text table."""
    path = Path(path)
    frame = results_frame(results)
    if fmt == "csv":
        frame.to_csv(path, index=False)
    elif fmt == "text":
        hashes = sorted({str(h) for h in frame.get("config_hash", [])})
        seeds = sorted({str(s) for s in frame.get("seed", [])})
        with open(path, "w") as f:
            f.write(f"# config_hash: {', '.join(hashes) or '-'}\n# seeds: {', '.join(seeds) or '-'}\n")
            f.write(frame.to_string(index=False, float_format=lambda v: f"{v:.3f}"))
            f.write("\n")
    else:
        raise InvalidArgumentError(f"unknown result format '{fmt}'")
    return path


def load_results(path) -> pd.DataFrame:
    return pd.read_csv(path)


def save_model(path, params: NetworkParams, metadata: Optional[dict] = None) -> Path:
    """Writes a model container.

    Layout: a magic line, one JSON header line (version, layer specs, input
    dimension, array shapes, metadata), then every weight matrix and bias
    vector in layer order as little-endian float64.
    """
    path = Path(path)
    header = {
        "version": MODEL_FORMAT_VERSION,
        "input_dim": params.input_dim,
        "layers": [{"width": spec.width, "activation": spec.activation} for spec in params.layers],
        "shapes": [list(a.shape) for a in params.arrays()],
        "dtype": "<f8",
        "metadata": metadata or {},
    }
    payload = np.concatenate([a.ravel() for a in params.arrays()]).astype("<f8")
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC + b"\n")
        f.write(json.dumps(header).encode("utf-8") + b"\n")
        f.write(payload.tobytes())
    return path


def load_model(path) -> Tuple[NetworkParams, dict]:
    """Reads a container written by :func:`save_model`.

    Raises:
        ModelFormatError: On a bad magic line, unknown version or truncated payload.
    """
    with open(path, "rb") as f:
        magic = f.readline().rstrip(b"\n")
        if magic != MODEL_MAGIC:
            raise ModelFormatError(f"{path} is not a model file")
        try:
            header = json.loads(f.readline().decode("utf-8"))
        except ValueError as exc:
            raise ModelFormatError(f"unreadable model header in {path}: {exc}") from exc
        payload = f.read()
    if header.get("version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model version {header.get('version')}")
    shapes = [tuple(s) for s in header["shapes"]]
    sizes = [int(np.prod(s)) for s in shapes]
    values = np.frombuffer(payload, dtype="<f8")
    if len(values) != sum(sizes):
        raise ModelFormatError(f"expected {sum(sizes)} values, found {len(values)}")
    chunks = np.split(values.astype(float), np.cumsum(sizes)[:-1])
    arrays = [c.reshape(s) for c, s in zip(chunks, shapes)]
    layers = [LayerSpec(int(l["width"]), l["activation"]) for l in header["layers"]]
    return NetworkParams(layers, arrays[0::2], arrays[1::2]), header.get("metadata", {})


def emit_timings(rows: Sequence, path) -> Path:
    """Writes timing sweep rows as CSV, one row per sample size."""
    path = Path(path)
    columns = ["n", "n_events", "full_seconds", "subsampled_seconds", "pairs_touched", "full_loss", "subsampled_loss"]
    pd.DataFrame([tuple(row) for row in rows], columns=columns).to_csv(path, index=False)
    return path


def emit_bias_variance(result, path) -> Path:
    """Writes the per-method squared bias / variance summary as CSV."""
    path = Path(path)
    frame = pd.DataFrame.from_dict(result.summary(), orient="index")
    frame.index.name = "method"
    frame.to_csv(path)
    return path
