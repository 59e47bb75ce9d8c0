"""
Dataset Files - Link dataset CSV and condition file reading/writing

One link per row: env_id, gnb_type, dx_m, dy_m, dz_m, then six columns per
path (p1..p20: loss_db, aoa_az_deg, aoa_el_deg, aod_az_deg, aod_el_deg,
delay_ns) and a final los_flag column. The carrier frequency lives in a
JSON sidecar next to the CSV.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.core.domain import (
    DEFAULT_CARRIER_HZ, DELAY, LOSS, MAX_LOSS_DB, NUM_PATHS, PARAMS_PER_PATH, Dataset, GnbType,
    LinkCondition, LinkRecord, PathSet, validate_record,
)
from src.core.errors import DatasetFormatError, EmptyDatasetError, RecordValidationError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9g"
CONDITION_COLUMNS = ['dx_m', 'dy_m', 'dz_m']
PATH_FIELDS = ['loss_db', 'aoa_az_deg', 'aoa_el_deg', 'aod_az_deg', 'aod_el_deg', 'delay_ns']
PATH_COLUMNS = [f"p{k}_{name}" for k in range(1, NUM_PATHS + 1) for name in PATH_FIELDS]
DATASET_COLUMNS = ['env_id', 'gnb_type'] + CONDITION_COLUMNS + PATH_COLUMNS + ['los_flag']
CONDITION_FILE_COLUMNS = CONDITION_COLUMNS + ['gnb_type']
GNB_TYPES = {t.value for t in GnbType}


def meta_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.meta.json")


def dataset_frame(data: Dataset) -> pd.DataFrame:
    """Dataset as a frame in file column order (delays in nanoseconds)"""
    arr = data.path_arrays.copy()
    arr[..., DELAY] *= 1e9
    frame = pd.DataFrame(arr.reshape(len(data), NUM_PATHS * PARAMS_PER_PATH), columns=PATH_COLUMNS)
    frame.insert(0, 'env_id', [r.env_id for r in data.records])
    frame.insert(1, 'gnb_type', [r.condition.gnb_type.value for r in data.records])
    for i, name in enumerate(CONDITION_COLUMNS):
        frame.insert(2 + i, name, data.conditions[:, i])
    frame['los_flag'] = [int(r.paths.entries[0].is_los) for r in data.records]
    return frame


def write_dataset(data: Dataset, path: Union[str, Path]) -> Path:
    """Write the dataset CSV plus its carrier sidecar"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataset_frame(data).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    with open(meta_path(path), 'w', encoding='utf-8') as f:
        json.dump({'carrier_hz': data.carrier_hz}, f, indent=2)
    logger.info(f"Dataset written: {path} ({len(data)} links)")
    return path


def _read_table(path: Path, required: Sequence[str]) -> pd.DataFrame:
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DatasetFormatError(f"{path.name} is empty")
    except pd.errors.ParserError as e:
        raise DatasetFormatError(f"{path.name}: wrong column count ({e})")

    for name in required:
        if name not in frame.columns:
            raise DatasetFormatError("missing column", column=name)
    extra = [c for c in frame.columns if c not in required]
    if extra:
        raise DatasetFormatError("unexpected column", column=extra[0])
    if len(frame) == 0:
        raise EmptyDatasetError(f"{path.name} has no data rows")
    return frame


def _numeric_block(frame: pd.DataFrame, columns: Sequence[str]) -> np.ndarray:
    """Parse columns as floats; the first unparsable cell is reported with file row and column"""
    out = np.empty((len(frame), len(columns)))
    for j, name in enumerate(columns):
        values = pd.to_numeric(frame[name].str.strip(), errors='coerce')
        bad = np.flatnonzero(values.isna().to_numpy())
        if bad.size:
            i = int(bad[0])
            raise DatasetFormatError(f"non-numeric value '{frame[name].iloc[i]}'", row=i + 2, column=name)
        out[:, j] = values.to_numpy(dtype=float)
    return out


def _gnb_types(frame: pd.DataFrame) -> List[GnbType]:
    types = []
    for i, value in enumerate(frame['gnb_type'].str.strip()):
        if value not in GNB_TYPES:
            raise DatasetFormatError(f"unknown gNB type '{value}'", row=i + 2, column='gnb_type')
        types.append(GnbType(value))
    return types


def _raw_findings(arr: np.ndarray, los_flag: np.ndarray) -> List[str]:
    """Checks that only make sense before absent rows are normalized"""
    findings = []
    absent = arr[:, LOSS] >= MAX_LOSS_DB
    for k in np.flatnonzero(arr[:, LOSS] > MAX_LOSS_DB):
        findings.append(f"path {k + 1}: loss out of range ({arr[k, LOSS]})")
    for k in np.flatnonzero(absent & np.any(arr[:, 1:] != 0.0, axis=1)):
        findings.append(f"path {k + 1}: absent path with nonzero fields")
    if los_flag and absent[0]:
        findings.append("los_flag set but path 1 is absent")
    return findings


def _read_carrier(path: Path) -> float:
    sidecar = meta_path(path)
    if not sidecar.exists():
        logger.info(f"No metadata for {path.name}, assuming carrier {DEFAULT_CARRIER_HZ:.3g} Hz")
        return DEFAULT_CARRIER_HZ
    try:
        with open(sidecar, 'r', encoding='utf-8') as f:
            return float(json.load(f)['carrier_hz'])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError(f"{sidecar.name}: unreadable metadata ({e})")


def parse_dataset(path: Union[str, Path]) -> Tuple[Dataset, Dict[int, List[str]]]:
    """
    Parse a dataset file without rejecting invalid records

    Returns the dataset and the findings per file row. Structural problems
    (header, column count, non-numeric cells) still raise DatasetFormatError.
    """
    path = Path(path)
    frame = _read_table(path, DATASET_COLUMNS)
    conditions = _numeric_block(frame, CONDITION_COLUMNS)
    paths = _numeric_block(frame, PATH_COLUMNS).reshape(len(frame), NUM_PATHS, PARAMS_PER_PATH)
    flags = _numeric_block(frame, ['los_flag'])[:, 0]
    bad_flag = np.flatnonzero((flags != 0.0) & (flags != 1.0))
    if bad_flag.size:
        raise DatasetFormatError("los_flag must be 0 or 1", row=int(bad_flag[0]) + 2, column='los_flag')
    types = _gnb_types(frame)
    paths[..., DELAY] *= 1e-9

    records, findings = [], {}
    for i in range(len(frame)):
        cond = LinkCondition(*(float(v) for v in conditions[i]), gnb_type=types[i])
        record = LinkRecord(frame['env_id'].iloc[i], cond, PathSet.from_array(paths[i], bool(flags[i])))
        row_findings = _raw_findings(paths[i], bool(flags[i])) + validate_record(record)['findings']
        if row_findings:
            findings[i + 2] = row_findings
        records.append(record)
    return Dataset(tuple(records), carrier_hz=_read_carrier(path)), findings


def read_dataset(path: Union[str, Path]) -> Dataset:
    """Read a dataset file, rejecting it when any record violates the record invariants"""
    data, findings = parse_dataset(path)
    if findings:
        flat = [f"row {row}: {msg}" for row, msgs in findings.items() for msg in msgs]
        raise RecordValidationError(f"{len(findings)} invalid records in {Path(path).name}", flat)
    logger.info(f"Dataset loaded: {path} ({len(data)} links, env '{data.env_id}')")
    return data


def read_conditions(path: Union[str, Path]) -> List[LinkCondition]:
    """Read a condition file with columns dx_m, dy_m, dz_m, gnb_type"""
    frame = _read_table(Path(path), CONDITION_FILE_COLUMNS)
    values = _numeric_block(frame, CONDITION_COLUMNS)
    types = _gnb_types(frame)
    return [LinkCondition(float(v[0]), float(v[1]), float(v[2]), t) for v, t in zip(values, types)]


def write_conditions(conditions: Sequence[LinkCondition], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({
        'dx_m': [u.dx_m for u in conditions],
        'dy_m': [u.dy_m for u in conditions],
        'dz_m': [u.dz_m for u in conditions],
        'gnb_type': [u.gnb_type.value for u in conditions],
    })
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path
