"""
Domain - Link records, path sets, unit conventions and record validation
"""

import math
import logging
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import cached_property
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from src.core.errors import EmptyDatasetError, InvalidConditionError
from src.types import ValidationReport

logger = logging.getLogger(__name__)

NUM_PATHS = 20
PARAMS_PER_PATH = 6
MAX_LOSS_DB = 200.0
SPEED_OF_LIGHT = 299792458.0
DEFAULT_CARRIER_HZ = 28e9

# Column order of PathSet.to_array(): loss, aoa az/el, aod az/el, delay (seconds)
LOSS, AOA_AZ, AOA_EL, AOD_AZ, AOD_EL, DELAY = range(PARAMS_PER_PATH)


class GnbType(str, Enum):
    STANDARD = "standard"
    DEDICATED = "dedicated"


class LinkState(IntEnum):
    """Link states in the fixed sampling order"""
    LOS = 0
    NLOS = 1
    NO_LINK = 2


@dataclass(frozen=True)
class PathEntry:
    loss_db: float
    aoa_az_deg: float = 0.0
    aoa_el_deg: float = 0.0
    aod_az_deg: float = 0.0
    aod_el_deg: float = 0.0
    delay_s: float = 0.0
    is_los: bool = False

    @classmethod
    def absent(cls) -> "PathEntry":
        return cls(loss_db=MAX_LOSS_DB)

    @property
    def is_present(self) -> bool:
        return self.loss_db < MAX_LOSS_DB

    def as_row(self) -> Tuple[float, ...]:
        return (self.loss_db, self.aoa_az_deg, self.aoa_el_deg,
                self.aod_az_deg, self.aod_el_deg, self.delay_s)


@dataclass(frozen=True)
class PathSet:
    """Exactly NUM_PATHS entries, LOS (if any) first, present before absent"""
    entries: Tuple[PathEntry, ...]

    def __post_init__(self):
        if len(self.entries) != NUM_PATHS:
            raise ValueError(f"PathSet needs {NUM_PATHS} entries, got {len(self.entries)}")

    @classmethod
    def empty(cls) -> "PathSet":
        return cls(tuple(PathEntry.absent() for _ in range(NUM_PATHS)))

    @classmethod
    def from_present(cls, paths: Iterable[PathEntry]) -> "PathSet":
        """Pad a list of present paths with absent entries"""
        present = list(paths)
        if len(present) > NUM_PATHS:
            raise ValueError(f"At most {NUM_PATHS} paths allowed, got {len(present)}")
        present.extend(PathEntry.absent() for _ in range(NUM_PATHS - len(present)))
        return cls(tuple(present))

    @classmethod
    def from_array(cls, arr: np.ndarray, los_flag: bool = False) -> "PathSet":
        """Build from a (20, 6) array; los_flag marks entry 0 as the LOS path"""
        arr = np.asarray(arr, dtype=float)
        entries = []
        for k in range(NUM_PATHS):
            row = arr[k]
            if row[LOSS] >= MAX_LOSS_DB:
                entries.append(PathEntry.absent())
                continue
            entries.append(PathEntry(
                loss_db=float(row[LOSS]),
                aoa_az_deg=float(row[AOA_AZ]),
                aoa_el_deg=float(row[AOA_EL]),
                aod_az_deg=float(row[AOD_AZ]),
                aod_el_deg=float(row[AOD_EL]),
                delay_s=float(row[DELAY]),
                is_los=bool(los_flag and k == 0),
            ))
        return cls(tuple(entries))

    def to_array(self) -> np.ndarray:
        return np.array([e.as_row() for e in self.entries], dtype=float)

    @property
    def present(self) -> List[PathEntry]:
        return [e for e in self.entries if e.is_present]

    @property
    def has_los(self) -> bool:
        return any(e.is_los for e in self.entries)

    def __len__(self) -> int:
        return len(self.present)


@dataclass(frozen=True)
class LinkCondition:
    """UAV-minus-gNB displacement plus gNB type"""
    dx_m: float
    dy_m: float
    dz_m: float
    gnb_type: GnbType = GnbType.STANDARD

    @property
    def displacement(self) -> np.ndarray:
        return np.array([self.dx_m, self.dy_m, self.dz_m], dtype=float)

    @property
    def d3d_m(self) -> float:
        return math.sqrt(self.dx_m * self.dx_m + self.dy_m * self.dy_m + self.dz_m * self.dz_m)

    @property
    def d2d_m(self) -> float:
        return math.sqrt(self.dx_m * self.dx_m + self.dy_m * self.dy_m)

    @property
    def is_dedicated(self) -> bool:
        return self.gnb_type == GnbType.DEDICATED

    def require_nonzero(self) -> float:
        d3d = self.d3d_m
        if not d3d > 0:
            raise InvalidConditionError("Zero displacement between UAV and gNB")
        return d3d


@dataclass(frozen=True)
class LinkRecord:
    env_id: str
    condition: LinkCondition
    paths: PathSet

    @property
    def state(self) -> LinkState:
        return derive_link_state(self.paths)


@dataclass(frozen=True)
class Dataset:
    records: Tuple[LinkRecord, ...]
    carrier_hz: float = DEFAULT_CARRIER_HZ

    def __post_init__(self):
        if len(self.records) == 0:
            raise EmptyDatasetError("Dataset has no records")
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def env_id(self) -> str:
        """Environment label of the first record (datasets are single-environment)"""
        return self.records[0].env_id

    @cached_property
    def conditions(self) -> np.ndarray:
        """(N, 3) displacement matrix"""
        return np.array([[r.condition.dx_m, r.condition.dy_m, r.condition.dz_m] for r in self.records])

    @cached_property
    def dedicated(self) -> np.ndarray:
        return np.array([r.condition.is_dedicated for r in self.records], dtype=bool)

    @cached_property
    def path_arrays(self) -> np.ndarray:
        """(N, 20, 6) path parameter tensor"""
        return np.stack([r.paths.to_array() for r in self.records])

    @cached_property
    def states(self) -> np.ndarray:
        return np.array([int(r.state) for r in self.records], dtype=int)

    @cached_property
    def los(self) -> np.ndarray:
        return self.states == LinkState.LOS

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(tuple(self.records[i] for i in indices), carrier_hz=self.carrier_hz)


def filter_by_type(data: Dataset, gnb_type: GnbType) -> Dataset:
    """Keep only links to one gNB type"""
    kept = tuple(r for r in data.records if r.condition.gnb_type == gnb_type)
    if not kept:
        raise EmptyDatasetError(f"No {gnb_type.value} links in dataset")
    return Dataset(kept, carrier_hz=data.carrier_hz)


def derive_link_state(paths: PathSet) -> LinkState:
    if any(e.is_los for e in paths.entries):
        return LinkState.LOS
    if all(not e.is_present for e in paths.entries):
        return LinkState.NO_LINK
    return LinkState.NLOS


def sort_present_first(paths: PathSet) -> PathSet:
    """Stable reorder putting LOS first, then present, then absent entries"""
    ordered = sorted(paths.entries, key=lambda e: (not e.is_los, not e.is_present))
    return PathSet(tuple(ordered))


def wrap_angle_deg(angle):
    """Wrap degrees into (-180, 180]"""
    wrapped = np.mod(np.asarray(angle, dtype=float) + 180.0, 360.0) - 180.0
    wrapped = np.where(wrapped == -180.0, 180.0, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def direction_from_angles(az_deg, el_deg) -> np.ndarray:
    """Unit vector(s) for azimuth and zenith-referenced elevation"""
    az = np.radians(az_deg)
    el = np.radians(el_deg)
    return np.stack([np.sin(el) * np.cos(az), np.sin(el) * np.sin(az), np.cos(el)], axis=-1)


def angles_from_direction(vec) -> Tuple[np.ndarray, np.ndarray]:
    """(azimuth, elevation) in degrees of vector(s); elevation from zenith"""
    vec = np.asarray(vec, dtype=float)
    r = np.linalg.norm(vec, axis=-1)
    az = np.degrees(np.arctan2(vec[..., 1], vec[..., 0]))
    el = np.degrees(np.arccos(np.clip(vec[..., 2] / r, -1.0, 1.0)))
    return wrap_angle_deg(az), el


def _entry_findings(k: int, entry: PathEntry) -> List[str]:
    findings = []
    values = entry.as_row()
    if not all(math.isfinite(v) for v in values):
        findings.append(f"path {k + 1}: non-finite value")
        return findings
    if entry.loss_db > MAX_LOSS_DB or entry.loss_db <= 0:
        findings.append(f"path {k + 1}: loss out of range ({entry.loss_db})")
    if not entry.is_present:
        if any(v != 0.0 for v in values[1:]) or entry.is_los:
            findings.append(f"path {k + 1}: absent path with nonzero fields")
        return findings
    for name, az in (("aoa", entry.aoa_az_deg), ("aod", entry.aod_az_deg)):
        if not -180.0 < az <= 180.0:
            findings.append(f"path {k + 1}: {name} azimuth out of range ({az})")
    for name, el in (("aoa", entry.aoa_el_deg), ("aod", entry.aod_el_deg)):
        if not 0.0 <= el <= 180.0:
            findings.append(f"path {k + 1}: {name} elevation out of range ({el})")
    if entry.delay_s < 0:
        findings.append(f"path {k + 1}: negative delay")
    return findings


def validate_record(rec: LinkRecord) -> ValidationReport:
    """List every violated record invariant; empty findings means valid"""
    findings = []
    cond = rec.condition
    if not all(math.isfinite(v) for v in (cond.dx_m, cond.dy_m, cond.dz_m)):
        findings.append("non-finite displacement")
    elif not cond.d3d_m > 0:
        findings.append("zero displacement")

    entries = rec.paths.entries
    for k, entry in enumerate(entries):
        findings.extend(_entry_findings(k, entry))

    los_indices = [k for k, e in enumerate(entries) if e.is_los]
    if len(los_indices) > 1:
        findings.append("multiple LOS paths")
    if any(k != 0 for k in los_indices):
        findings.append("LOS not at index 0")

    seen_absent = False
    for e in entries:
        if not e.is_present:
            seen_absent = True
        elif seen_absent:
            findings.append("present path after absent path")
            break

    return {'valid': not findings, 'findings': findings}
