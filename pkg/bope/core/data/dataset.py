"""
Module containing the logged pricing dataset and its CSV input/output.

CSV files are read with every cell as text and cast with numpy's string to
float conversion, which is correctly rounded, so that re-emitting a loaded
dataset with `write_csv` reproduces every retained value bit-exactly.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd

from bope.core.errors import DataError

logger = logging.getLogger(__name__)


def _frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class CsvSchema:
    """
    Mapping from CSV columns to the dataset fields.

    :param feature_columns: Covariate columns (in kernel order).
    :param price_column: Logged price column.
    :param demand_column: Binary demand column.
    """

    feature_columns: Tuple[str, ...]
    price_column: str
    demand_column: str

    def __post_init__(self):
        object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        if len(self.feature_columns) == 0:
            raise DataError("CSV schema needs at least one feature column")
        columns = self.columns
        if len(set(columns)) != len(columns):
            raise DataError(f"CSV schema maps the same column twice: {columns}")

    @property
    def columns(self) -> Tuple[str, ...]:
        return self.feature_columns + (self.price_column, self.demand_column)


@dataclass(frozen=True, eq=False)
class PricingDataset:
    """
    Logged pricing data: one row per customer with the offered price and the
    observed binary demand. Arrays are read-only after construction.
    """

    features: np.ndarray
    logged_prices: np.ndarray
    demands: np.ndarray

    def __post_init__(self):
        features = np.array(self.features, dtype=float)
        if features.ndim == 1:
            features = features[:, None]
        prices = np.array(self.logged_prices, dtype=float).reshape(-1)
        demands = np.array(self.demands, dtype=float).reshape(-1)

        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise DataError(f"Features must be a non-empty n x d matrix, got shape {features.shape}")
        n = features.shape[0]
        if prices.shape[0] != n or demands.shape[0] != n:
            raise DataError(
                f"Row count mismatch: {n} feature rows, {prices.shape[0]} prices, {demands.shape[0]} demands"
            )
        if not np.all(np.isfinite(features)):
            row = int(np.argwhere(~np.isfinite(features))[0, 0])
            raise DataError(f"Row {row}: non-finite feature value")
        bad_price = ~(np.isfinite(prices) & (prices > 0))
        if np.any(bad_price):
            row = int(np.argmax(bad_price))
            raise DataError(f"Row {row}: price {prices[row]} is not strictly positive")
        bad_demand = ~np.isin(demands, (0.0, 1.0))
        if np.any(bad_demand):
            row = int(np.argmax(bad_demand))
            raise DataError(f"Row {row}: demand {demands[row]} is outside {{0,1}}")

        object.__setattr__(self, "features", _frozen_array(features))
        object.__setattr__(self, "logged_prices", _frozen_array(prices))
        object.__setattr__(self, "demands", _frozen_array(demands.astype(np.int64), dtype=np.int64))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def revenues(self) -> np.ndarray:
        """Observed revenues p_i D_i."""
        return self.logged_prices * self.demands


def _parse_column(raw: pd.Series, column: str, row_ids: np.ndarray) -> np.ndarray:
    # to_numeric locates bad cells; the values come from numpy's correctly rounded cast
    located = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(located)
    if np.any(bad):
        k = int(np.argmax(bad))
        cell = raw.iloc[k]
        if np.isnan(located[k]) and cell.lower() not in ("nan", "-nan", "+nan"):
            raise DataError(f"Row {row_ids[k]}, column '{column}': cannot parse '{cell}' as a number")
        raise DataError(f"Row {row_ids[k]}, column '{column}': value '{cell}' is not finite")
    try:
        return raw.to_numpy(dtype=str).astype(float)
    except ValueError as e:
        raise DataError(f"Column '{column}': {e}") from None


def load_csv(path: Union[str, Path], schema: CsvSchema) -> PricingDataset:
    """
    Load a logged pricing dataset from a CSV file.

    Rows with a missing mapped field are dropped and their (0-based, header
    excluded) row indices are logged. Unparseable cells, non-positive prices
    and demands outside {0,1} are errors naming the row.

    :param path: CSV file (comma separated, header row, UTF-8).
    :param schema: Column mapping.
    :return: Validated dataset of the retained rows.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"CSV file {path} does not exist")

    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    df.columns = [str(c).strip() for c in df.columns]
    missing_columns = [c for c in schema.columns if c not in df.columns]
    if missing_columns:
        raise DataError(f"CSV file {path} has no column(s) {missing_columns}")

    df = df[list(schema.columns)].apply(lambda s: s.str.strip())
    incomplete = (df == "").any(axis=1).to_numpy()
    if np.any(incomplete):
        rejected = np.flatnonzero(incomplete).tolist()
        logger.warning("Rejected %s row(s) with missing fields: %s", len(rejected), rejected)
    row_ids = np.flatnonzero(~incomplete)
    df = df.loc[~incomplete]
    if len(df) == 0:
        raise DataError(f"CSV file {path} has no complete rows")

    parsed: Dict[str, np.ndarray] = {c: _parse_column(df[c], c, row_ids) for c in schema.columns}
    prices = parsed[schema.price_column]
    demands = parsed[schema.demand_column]
    for values, what, valid in (
        (prices, "price", prices > 0),
        (demands, "demand", np.isin(demands, (0.0, 1.0))),
    ):
        if not np.all(valid):
            k = int(np.argmin(valid))
            raise DataError(f"Row {row_ids[k]}: {what} {values[k]} is invalid")

    features = np.column_stack([parsed[c] for c in schema.feature_columns])
    logger.debug("Loaded %s rows with %s features from %s", len(df), features.shape[1], path)
    return PricingDataset(features=features, logged_prices=prices, demands=demands)


def write_csv(ds: PricingDataset, path: Union[str, Path], schema: CsvSchema) -> Path:
    """
    Write a dataset back to CSV using the schema's column names.
    Floats are written with their shortest round-trip representation.
    """
    if len(schema.feature_columns) != ds.d:
        raise DataError(f"Schema maps {len(schema.feature_columns)} feature columns but dataset has {ds.d}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns: Dict[str, List] = {
        c: [repr(float(v)) for v in ds.features[:, j]] for j, c in enumerate(schema.feature_columns)
    }
    columns[schema.price_column] = [repr(float(v)) for v in ds.logged_prices]
    columns[schema.demand_column] = [str(int(v)) for v in ds.demands]
    pd.DataFrame(columns).to_csv(path, index=False)
    return path
