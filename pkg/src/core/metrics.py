"""
Metrics - Omnidirectional path loss, Wasserstein-1, LOS-probability grid MAE, angular distributions, CDF export
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.core.domain import AOA_AZ, AOD_EL, LOSS, MAX_LOSS_DB, Dataset, GnbType, PathSet, wrap_angle_deg
from src.core.errors import EmptyDatasetError, InvalidConditionError
from src.core.pathcodec import los_directions

logger = logging.getLogger(__name__)

OMNI_MODES = ("power_sum", "strongest")
ANGLE_NAMES = ("aoa_az", "aoa_el", "aod_az", "aod_el")

PlosFunction = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GridSpec:
    d2d_bin_m: float = 20.0
    dz_bin_m: float = 5.0

    def __post_init__(self):
        if not (self.d2d_bin_m > 0 and self.dz_bin_m > 0):
            raise ValueError("Grid bin widths must be positive")


@dataclass(frozen=True)
class CdfSamples:
    """Sorted, nonempty sample of a scalar"""
    values: np.ndarray

    @classmethod
    def from_values(cls, values) -> "CdfSamples":
        arr = np.asarray(values, dtype=float).reshape(-1)
        arr = arr[np.isfinite(arr)]
        if arr.size == 0:
            raise EmptyDatasetError("CDF needs at least one finite sample")
        return cls(np.sort(arr))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def cumulative(self) -> np.ndarray:
        n = len(self.values)
        return np.arange(1, n + 1) / n


@dataclass(frozen=True)
class AngularDistribution:
    """Relative-angle histograms (rows: distance bins) for the four path angles"""
    distance_edges_m: np.ndarray
    angle_edges_deg: np.ndarray
    histograms: Dict[str, np.ndarray]
    iqr_deg: Dict[str, np.ndarray]
    path_counts: np.ndarray


def omni_pathloss_array(path_arrays: np.ndarray, mode: str = "power_sum") -> np.ndarray:
    """Per-link omnidirectional loss in dB; NaN for links without paths"""
    if mode not in OMNI_MODES:
        raise ValueError(f"Unknown omni mode: {mode}")
    loss = np.asarray(path_arrays, dtype=float)[..., LOSS]
    present = loss < MAX_LOSS_DB
    any_present = present.any(axis=-1)
    if mode == "strongest":
        out = np.where(present, loss, np.inf).min(axis=-1)
    else:
        power = np.where(present, 10.0 ** (-loss / 10.0), 0.0).sum(axis=-1)
        out = -10.0 * np.log10(np.where(any_present, power, 1.0))
    return np.where(any_present, out, np.nan)


def omni_pathloss(paths: PathSet, mode: str = "power_sum") -> float:
    if not paths.present:
        raise InvalidConditionError("Omnidirectional path loss is undefined for a link with no paths")
    return float(omni_pathloss_array(paths.to_array()[None], mode)[0])


def _samples(x) -> CdfSamples:
    return x if isinstance(x, CdfSamples) else CdfSamples.from_values(x)


def wasserstein1(p, q) -> float:
    """Integrated absolute difference of the two empirical CDFs"""
    u = _samples(p).values
    v = _samples(q).values
    merged = np.sort(np.concatenate([u, v]))
    deltas = np.diff(merged)
    u_cdf = np.searchsorted(u, merged[:-1], side='right') / len(u)
    v_cdf = np.searchsorted(v, merged[:-1], side='right') / len(v)
    return float(np.sum(np.abs(u_cdf - v_cdf) * deltas))


def wasserstein1_sorted_pairs(p, q) -> float:
    """Mean absolute difference of sorted samples (equal sample counts only)"""
    u = _samples(p).values
    v = _samples(q).values
    if len(u) != len(v):
        raise ValueError("Sorted-pairs distance needs equal sample counts")
    return float(np.mean(np.abs(u - v)))


def _d2d_dz(data: Dataset):
    d = data.conditions
    return np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2), d[:, 2]


def plos_grid_table(model_probs: PlosFunction, test: Dataset, grid: GridSpec = GridSpec()) -> pd.DataFrame:
    """
    Empirical LOS fraction and model LOS probability per (gNB type, d2D, dz) bin

    model_probs(d2d, dz, dedicated) is evaluated at the bin centers. Only
    nonempty bins appear.
    """
    d2d, dz = _d2d_dz(test)
    frame = pd.DataFrame({
        'dedicated': test.dedicated,
        'i': np.floor(d2d / grid.d2d_bin_m).astype(int),
        'j': np.floor(dz / grid.dz_bin_m).astype(int),
        'los': test.los.astype(float),
    })
    table = frame.groupby(['dedicated', 'i', 'j'], sort=True).agg(
        n_links=('los', 'size'), empirical=('los', 'mean')).reset_index()
    table['d2d_center_m'] = (table['i'] + 0.5) * grid.d2d_bin_m
    table['dz_center_m'] = (table['j'] + 0.5) * grid.dz_bin_m
    table['model'] = np.asarray(model_probs(
        table['d2d_center_m'].to_numpy(), table['dz_center_m'].to_numpy(), table['dedicated'].to_numpy()), dtype=float)
    table['abs_error'] = np.abs(table['model'] - table['empirical'])
    table['gnb_type'] = np.where(table['dedicated'], GnbType.DEDICATED.value, GnbType.STANDARD.value)
    return table[['gnb_type', 'd2d_center_m', 'dz_center_m', 'n_links', 'empirical', 'model', 'abs_error']]


def plos_grid_mae(model_probs: PlosFunction, test: Dataset, grid: GridSpec = GridSpec()) -> float:
    """Mean absolute LOS-probability error over nonempty grid bins"""
    return float(plos_grid_table(model_probs, test, grid)['abs_error'].mean())


def relative_path_angles(data: Dataset) -> np.ndarray:
    """(N, 20, 4) path angles relative to each link's LOS direction, in degrees"""
    los_angles, _ = los_directions(data.conditions)
    return wrap_angle_deg(data.path_arrays[..., AOA_AZ:AOD_EL + 1] - los_angles[:, None, :])


def angular_distribution(data: Dataset, threshold_db: float = 30.0,
                         distance_edges_m: Sequence[float] = (0.0, 150.0, 300.0, 600.0, 1500.0),
                         angle_bins: int = 36, gnb_type: Optional[GnbType] = None) -> AngularDistribution:
    """
    Histograms of path angles relative to the LOS direction versus 3D distance

    Per link only paths within threshold_db of the strongest path are kept
    (a path exactly threshold_db weaker is kept). Rows are normalized per
    distance bin; empty rows stay zero with NaN IQR.
    """
    if gnb_type is not None:
        mask = data.dedicated == (gnb_type == GnbType.DEDICATED)
        if not mask.any():
            raise EmptyDatasetError(f"No {gnb_type.value} links for angular distribution")
        data = data.subset(np.flatnonzero(mask))

    loss = data.path_arrays[..., LOSS]
    present = loss < MAX_LOSS_DB
    strongest = np.where(present, loss, np.inf).min(axis=1)
    keep = present & (loss <= strongest[:, None] + threshold_db)

    edges = np.asarray(distance_edges_m, dtype=float)
    n_dist = len(edges) - 1
    d3d = np.linalg.norm(data.conditions, axis=1)
    dist_bin = np.digitize(d3d, edges) - 1
    in_range = (dist_bin >= 0) & (dist_bin < n_dist)
    keep &= in_range[:, None]

    rel = relative_path_angles(data)
    angle_edges = np.linspace(-180.0, 180.0, angle_bins + 1)
    bin_of_path = np.broadcast_to(dist_bin[:, None], keep.shape)[keep]
    counts = np.bincount(bin_of_path, minlength=n_dist)

    histograms, iqr = {}, {}
    for a, name in enumerate(ANGLE_NAMES):
        values = rel[..., a][keep]
        hist = np.zeros((n_dist, angle_bins))
        spread = np.full(n_dist, np.nan)
        for b in range(n_dist):
            sel = values[bin_of_path == b]
            if sel.size == 0:
                continue
            h, _ = np.histogram(sel, bins=angle_edges)
            hist[b] = h / sel.size
            q75, q25 = np.percentile(sel, [75, 25])
            spread[b] = q75 - q25
        histograms[name] = hist
        iqr[name] = spread
    return AngularDistribution(edges, angle_edges, histograms, iqr, counts)


def angular_table(dist: AngularDistribution) -> pd.DataFrame:
    """Long-format histogram rows for CSV export"""
    rows = []
    for name in ANGLE_NAMES:
        hist = dist.histograms[name]
        for b in range(hist.shape[0]):
            for k in range(hist.shape[1]):
                rows.append({
                    'angle': name,
                    'd3d_lo_m': dist.distance_edges_m[b],
                    'd3d_hi_m': dist.distance_edges_m[b + 1],
                    'rel_lo_deg': dist.angle_edges_deg[k],
                    'rel_hi_deg': dist.angle_edges_deg[k + 1],
                    'fraction': hist[b, k],
                })
    return pd.DataFrame(rows)


def angular_iqr_table(dist: AngularDistribution) -> pd.DataFrame:
    rows = []
    for b in range(len(dist.path_counts)):
        row = {'d3d_lo_m': dist.distance_edges_m[b], 'd3d_hi_m': dist.distance_edges_m[b + 1],
               'n_paths': int(dist.path_counts[b])}
        row.update({f'{name}_iqr_deg': dist.iqr_deg[name][b] for name in ANGLE_NAMES})
        rows.append(row)
    return pd.DataFrame(rows)


def export_cdf(samples, path: Union[str, Path]) -> Path:
    """Write (value, cdf) rows; the last cumulative fraction is 1"""
    cdf = _samples(samples)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({'value': cdf.values, 'cdf': cdf.cumulative}).to_csv(path, index=False, float_format='%.17g')
    return path


def read_cdf(path: Union[str, Path]) -> CdfSamples:
    frame = pd.read_csv(path, float_precision="round_trip")
    return CdfSamples.from_values(frame['value'].to_numpy())
