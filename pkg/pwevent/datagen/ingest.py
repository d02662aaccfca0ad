"""Turn record-per-row CSV files into slot batches."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from logzero import logger

from pwevent.core.types import ABSENT, StreamBatch
from pwevent.utils import export_json, import_json


@dataclass(frozen=True)
class GridSpec:
    """A bounding box split into g x g cells, indexed row-major (row = latitude)."""
    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float
    g: int = 10

    def __post_init__(self):
        if not self.lon_max > self.lon_min or not self.lat_max > self.lat_min:
            raise ValueError("Grid bounds need max > min on both axes.")
        if self.g < 1:
            raise ValueError(f"Grid side must be positive, got {self.g}.")

    @property
    def d(self):
        return self.g * self.g

    def cells(self, lon, lat):
        """Cell index per point, -1 outside the box; points on the max edge clamp inward."""
        lon = np.asarray(lon, dtype=float)
        lat = np.asarray(lat, dtype=float)
        inside = ((lon >= self.lon_min) & (lon <= self.lon_max)
                  & (lat >= self.lat_min) & (lat <= self.lat_max))
        col = np.floor((lon - self.lon_min) / (self.lon_max - self.lon_min) * self.g)
        row = np.floor((lat - self.lat_min) / (self.lat_max - self.lat_min) * self.g)
        col = np.clip(np.nan_to_num(col), 0, self.g - 1).astype(np.int64)
        row = np.clip(np.nan_to_num(row), 0, self.g - 1).astype(np.int64)
        return np.where(inside, row * self.g + col, -1)


@dataclass(frozen=True)
class IngestSchema:
    """Column names for either category mode or geo mode."""
    user_col: str
    time_col: str
    category_col: Optional[str] = None
    lon_col: Optional[str] = None
    lat_col: Optional[str] = None
    grid: Optional[GridSpec] = None

    def __post_init__(self):
        geo = self.lon_col is not None or self.lat_col is not None
        if geo == (self.category_col is not None):
            raise ValueError("Give either a category column or lon/lat columns, not both.")
        if geo and (self.lon_col is None or self.lat_col is None or self.grid is None):
            raise ValueError("Geo mode needs lon_col, lat_col and a GridSpec.")

    @property
    def geo(self):
        return self.category_col is None


@dataclass
class IngestResult:
    batches: list
    d: int
    users: list
    categories: Optional[dict] = None
    counters: dict = field(default_factory=dict)


def _parse_times(values):
    """Numeric timestamps as-is; anything else parsed as datetimes in seconds."""
    numeric = pd.to_numeric(values, errors='coerce')
    if numeric.notna().sum() >= values.notna().sum():
        return numeric
    parsed = pd.to_datetime(values, errors='coerce')
    return (parsed - pd.Timestamp(0)) / pd.Timedelta(seconds=1)


def _load_categories(path):
    if path is not None and Path(path).exists():
        return dict(import_json(path))
    return {}


def ingest_csv(path, schema, slot_width, category_map_path=None):
    """Read a CSV into per-slot batches.

    Args:
        path (str or Path): CSV with a header row.
        schema (IngestSchema): Which columns hold user, time and value.
        slot_width (float): Width of a slot in timestamp units (seconds for
            datetime columns).
        category_map_path (str or Path, optional): Sidecar json holding the
            category-to-bucket map; extended and rewritten on every call.

    Returns:
        IngestResult: Batches plus counters that satisfy
        parsed = bucketed + skipped + out_of_box + deduplicated.

    Raises:
        OSError: If the file cannot be read.
    """
    if not slot_width > 0:
        raise ValueError(f"Slot width must be positive, got {slot_width}.")
    counters = {'parsed': 0, 'bucketed': 0, 'skipped': 0, 'out_of_box': 0, 'deduplicated': 0}
    try:
        frame = pd.read_csv(path, dtype=str)
    except pd.errors.EmptyDataError:
        logger.warning(f"{path} is empty.")
        frame = pd.DataFrame()
    except OSError as e:
        logger.error(f"Failed to read {path}: {e}")
        raise
    d = schema.grid.d if schema.geo else 0
    if frame.empty:
        return IngestResult([], d, [], None if schema.geo else {}, counters)

    counters['parsed'] = len(frame)
    value_cols = [schema.lon_col, schema.lat_col] if schema.geo else [schema.category_col]
    missing = [c for c in [schema.user_col, schema.time_col] + value_cols if c not in frame]
    if missing:
        raise ValueError(f"CSV is missing columns {missing}.")

    times = _parse_times(frame[schema.time_col])
    valid = frame[schema.user_col].notna() & times.notna()
    if schema.geo:
        lon = pd.to_numeric(frame[schema.lon_col], errors='coerce')
        lat = pd.to_numeric(frame[schema.lat_col], errors='coerce')
        valid &= lon.notna() & lat.notna()
    else:
        valid &= frame[schema.category_col].notna()
    counters['skipped'] = int((~valid).sum())
    if counters['skipped']:
        logger.warning(f"Skipped {counters['skipped']} malformed rows in {path}.")

    rows = pd.DataFrame({'user': frame[schema.user_col], 'time': times})[valid].copy()
    categories = None
    if schema.geo:
        rows['bucket'] = schema.grid.cells(lon[valid], lat[valid])
        outside = rows['bucket'] < 0
        counters['out_of_box'] = int(outside.sum())
        rows = rows[~outside].copy()
    else:
        rows['category'] = frame.loc[valid, schema.category_col]
        # First appearance includes rows later dropped as duplicates.
        categories = _load_categories(category_map_path)
        for name in rows['category']:
            if name not in categories:
                categories[name] = len(categories)
        if category_map_path is not None:
            export_json(categories, category_map_path)
        d = len(categories)

    origin = rows['time'].min() if len(rows) else 0.0
    rows['slot'] = (np.floor((rows['time'] - origin) / slot_width) + 1).astype(np.int64)
    deduped = rows.drop_duplicates(subset=['user', 'slot'], keep='last')
    counters['deduplicated'] = len(rows) - len(deduped)
    rows = deduped.copy()
    counters['bucketed'] = len(rows)

    if not schema.geo:
        rows = rows.assign(bucket=rows['category'].map(categories))

    users = list(pd.unique(rows['user']))
    index = {user: i for i, user in enumerate(users)}
    n_slots = int(rows['slot'].max()) if len(rows) else 0
    assignments = np.full((n_slots, len(users)), ABSENT, dtype=np.int64)
    assignments[rows['slot'].to_numpy() - 1, rows['user'].map(index).to_numpy()] = \
        rows['bucket'].to_numpy(dtype=np.int64)
    batches = [StreamBatch(slot, assignments[slot - 1], max(d, 1))
               for slot in range(1, n_slots + 1)]
    logger.info(f"Ingested {counters['bucketed']} rows from {path} into {n_slots} slots.")
    return IngestResult(batches, d, users, categories, counters)
