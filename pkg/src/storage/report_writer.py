"""CSV tables and JSON documents written into run directories."""
from typing import Any, Dict, List, Sequence
import json
import logging
import math
import os

import numpy as np
import pandas as pd

from src.models.flow import Trajectory
from src.utils.constants import CsvColumns
from src.utils.exceptions import StorageError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def write_table(rows: Sequence[Sequence[Any]], columns: List[str], path: str) -> str:
    """One CSV with a fixed header; an empty table still gets its header row."""
    for row in rows:
        if len(row) != len(columns):
            raise StorageError(f"Row has {len(row)} values, {os.path.basename(path)} has {len(columns)} columns", path=path)
    frame = pd.DataFrame(list(rows), columns=columns)
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise StorageError(f"Could not write {path}: {e}", path=path)
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def read_table(path: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise StorageError(f"Table {path} does not exist", path=path)
    return pd.read_csv(path)


def write_series(trajectory: Trajectory, path: str) -> str:
    return write_table([record.as_row() for record in trajectory.series], CsvColumns.SERIES, path)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(document: Dict[str, Any], path: str) -> str:
    """Sorted, indented JSON; non-finite floats become null."""
    try:
        with open(path, "w") as handle:
            json.dump(_jsonable(document), handle, indent=2, sort_keys=True)
            handle.write("\n")
    except OSError as e:
        raise StorageError(f"Could not write {path}: {e}", path=path)
    return path


def read_json(path: str) -> Dict[str, Any]:
    try:
        with open(path) as handle:
            return json.load(handle)
    except OSError as e:
        raise StorageError(f"Could not read {path}: {e}", path=path)
    except ValueError as e:
        raise StorageError(f"Malformed JSON in {path}: {e}", path=path)
