"""
Air Simulation - Planar-array beamforming, link-budget SNR and the single-cell SNR map

SNR (dB) = P_rx (dBm) - N (dBm), with
  P_rx = 10 log10 sum_k 10^((P_tx + G_tx,k + G_rx,k - L_k) / 10)
  N    = -174 dBm/Hz + 10 log10(B) + losses
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.core.domain import AOA_AZ, AOA_EL, AOD_AZ, AOD_EL, LOSS, MAX_LOSS_DB, GnbType, LinkCondition, PathSet, direction_from_angles
from src.core.genmodel import GenerativeModel, generate_batch
from src.utils.run_config import BudgetConfig, SnrMapConfig

logger = logging.getLogger(__name__)

POWER_FLOOR = 1e-30
GNB_HEIGHTS_M = {GnbType.STANDARD: 2.0, GnbType.DEDICATED: 30.0}
STANDARD_SECTOR_AZIMUTHS_DEG = (0.0, 120.0, 240.0)


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform planar array facing the boresight direction (elevation from zenith)"""
    rows: int
    cols: int
    spacing_wl: float = 0.5
    boresight_az_deg: float = 0.0
    boresight_el_deg: float = 90.0
    hpbw_az_deg: float = 65.0
    hpbw_el_deg: float = 65.0
    front_to_back_db: float = 30.0
    element_peak_db: float = 0.0

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0 or not self.spacing_wl > 0:
            raise ValueError("Array dimensions and spacing must be positive")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols

    def basis(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(boresight, horizontal, vertical) unit vectors of the panel"""
        az = np.radians(self.boresight_az_deg)
        b = direction_from_angles(self.boresight_az_deg, self.boresight_el_deg)
        h = np.array([-np.sin(az), np.cos(az), 0.0])
        v = np.cross(b, h)
        return b, h, v


@dataclass(frozen=True)
class LinkBudget:
    carrier_hz: float = 28e9
    bandwidth_hz: float = 400e6
    tx_power_dbm: float = 23.0
    losses_db: float = 6.0
    noise_psd_dbm_hz: float = -174.0

    def __post_init__(self):
        if not (self.bandwidth_hz > 0 and self.carrier_hz > 0):
            raise ValueError("Bandwidth and carrier must be positive")

    @classmethod
    def from_config(cls, cfg: BudgetConfig) -> "LinkBudget":
        return cls(**cfg.model_dump())

    @property
    def noise_dbm(self) -> float:
        return self.noise_psd_dbm_hz + 10.0 * np.log10(self.bandwidth_hz) + self.losses_db


def uav_array() -> ArrayConfig:
    """4x4 panel facing straight down"""
    return ArrayConfig(rows=4, cols=4, boresight_el_deg=180.0)


def gnb_arrays(gnb_type: GnbType) -> Tuple[ArrayConfig, ...]:
    """8x8 sectors: three downtilted sectors for street-level, one upward panel for rooftop"""
    if gnb_type == GnbType.DEDICATED:
        return (ArrayConfig(rows=8, cols=8, boresight_el_deg=0.0),)
    return tuple(ArrayConfig(rows=8, cols=8, boresight_az_deg=az, boresight_el_deg=100.0)
                 for az in STANDARD_SECTOR_AZIMUTHS_DEG)


def element_gain(cfg: ArrayConfig, direction) -> np.ndarray:
    """Parabolic-in-dB element pattern relative to boresight, floored at the front-to-back ratio"""
    u = np.asarray(direction, dtype=float)
    b, h, v = cfg.basis()
    d_az = np.degrees(np.arctan2(u @ h, u @ b))
    d_el = np.degrees(np.arcsin(np.clip(u @ v, -1.0, 1.0)))
    attenuation = 12.0 * (d_el / cfg.hpbw_el_deg) ** 2 + 12.0 * (d_az / cfg.hpbw_az_deg) ** 2
    return cfg.element_peak_db - np.minimum(attenuation, cfg.front_to_back_db)


def beamforming_gain(cfg: ArrayConfig, steer_direction, path_direction) -> np.ndarray:
    """Conjugate-steered array factor power |AF|^2 / N in dB plus element gain toward the path"""
    _, h, v = cfg.basis()
    du = np.asarray(path_direction, dtype=float) - np.asarray(steer_direction, dtype=float)
    alpha = 2.0 * np.pi * cfg.spacing_wl * (du @ v)
    beta = 2.0 * np.pi * cfg.spacing_wl * (du @ h)
    af_rows = np.exp(1j * np.multiply.outer(alpha, np.arange(cfg.rows))).sum(axis=-1)
    af_cols = np.exp(1j * np.multiply.outer(beta, np.arange(cfg.cols))).sum(axis=-1)
    power = np.abs(af_rows * af_cols) ** 2 / cfg.n_elements
    return 10.0 * np.log10(np.maximum(power, POWER_FLOOR)) + element_gain(cfg, path_direction)


def _sector_rx_power_dbm(loss: np.ndarray, tx_dirs: np.ndarray, rx_dirs: np.ndarray, budget: LinkBudget,
                         uav_cfg: ArrayConfig, gnb_cfg: ArrayConfig) -> float:
    weighted = -loss + element_gain(uav_cfg, tx_dirs) + element_gain(gnb_cfg, rx_dirs)
    best = int(np.argmax(weighted))
    g_tx = beamforming_gain(uav_cfg, tx_dirs[best], tx_dirs)
    g_rx = beamforming_gain(gnb_cfg, rx_dirs[best], rx_dirs)
    terms = budget.tx_power_dbm + g_tx + g_rx - loss
    return float(10.0 * np.log10(np.sum(10.0 ** (terms / 10.0))))


def link_snr(paths: PathSet, budget: LinkBudget, uav_cfg: ArrayConfig,
             gnb_cfgs: Sequence[ArrayConfig]) -> float:
    """Local-average SNR with both arrays steered at the strongest element-weighted path"""
    arr = paths.to_array()
    arr = arr[arr[:, LOSS] < MAX_LOSS_DB]
    if len(arr) == 0:
        return float('-inf')
    tx_dirs = direction_from_angles(arr[:, AOD_AZ], arr[:, AOD_EL])
    rx_dirs = direction_from_angles(arr[:, AOA_AZ], arr[:, AOA_EL])
    rx_power = max(_sector_rx_power_dbm(arr[:, LOSS], tx_dirs, rx_dirs, budget, uav_cfg, sector)
                   for sector in gnb_cfgs)
    return rx_power - budget.noise_dbm


def snr_map(model: GenerativeModel, cfg: SnrMapConfig, budget: LinkBudget, seed: int,
            gnb_type: Optional[GnbType] = None, uav_cfg: Optional[ArrayConfig] = None) -> pd.DataFrame:
    """
    Median SNR over generated realizations on an (x, z) grid above one gNB

    The gNB sits at (0, 0, h_gnb) and the UAV at (x, 0, z). NoLink
    realizations count as cfg.floor_db; a grid point coinciding with the gNB
    reports NaN.
    """
    gnb_type = gnb_type or GnbType(cfg.gnb_type)
    uav_cfg = uav_cfg or uav_array()
    gnb_cfgs = gnb_arrays(gnb_type)
    h_gnb = GNB_HEIGHTS_M[gnb_type]
    xs = np.linspace(cfg.x_min_m, cfg.x_max_m, cfg.x_steps)
    zs = np.linspace(cfg.z_min_m, cfg.z_max_m, cfg.z_steps)
    logger.info(f"SNR map for {gnb_type.value} gNB: {len(xs)}x{len(zs)} points, {cfg.n_real} realizations each")

    rows = []
    for i, x in enumerate(xs):
        for j, z in enumerate(zs):
            cond = LinkCondition(float(x), 0.0, float(z - h_gnb), gnb_type)
            if not cond.d3d_m > 0:
                rows.append({'x': x, 'z': z, 'median_snr_db': np.nan})
                continue
            links = generate_batch(model, [cond] * cfg.n_real, seed, stream_key=(i, j))
            snrs = [link_snr(p, budget, uav_cfg, gnb_cfgs) for p in links]
            snrs = np.asarray(snrs)
            snrs = np.where(np.isneginf(snrs), cfg.floor_db, snrs)
            rows.append({'x': x, 'z': z, 'median_snr_db': float(np.median(snrs))})
    return pd.DataFrame(rows)
