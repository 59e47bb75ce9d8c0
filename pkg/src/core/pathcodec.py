"""
Path Codec - NLOS path parameters <-> normalized 120-vector, and deterministic LOS path synthesis
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.core.domain import (
    AOA_AZ, AOD_EL, DEFAULT_CARRIER_HZ, DELAY, LOSS, MAX_LOSS_DB, NUM_PATHS, PARAMS_PER_PATH,
    SPEED_OF_LIGHT, Dataset, LinkState, PathEntry, PathSet, angles_from_direction, wrap_angle_deg,
)
from src.core.errors import EmptyDatasetError, InvalidConditionError
from src.core.numerics import MinMaxScaler, minmax_apply, minmax_fit, minmax_invert

logger = logging.getLogger(__name__)

ENCODED_SIZE = NUM_PATHS * PARAMS_PER_PATH
ANGLE_SCALE_DEG = 180.0
DEFAULT_ABSENT_EPS = 0.01
ABSENT_ROW = np.array([MAX_LOSS_DB, 0.0, 0.0, 0.0, 0.0, 0.0])


@dataclass(frozen=True)
class LosGeometry:
    phi_tx_deg: float
    theta_tx_deg: float
    phi_rx_deg: float
    theta_rx_deg: float
    tau_los_s: float
    loss_los_db: float

    def as_entry(self) -> PathEntry:
        return PathEntry(
            loss_db=self.loss_los_db,
            aoa_az_deg=self.phi_rx_deg,
            aoa_el_deg=self.theta_rx_deg,
            aod_az_deg=self.phi_tx_deg,
            aod_el_deg=self.theta_tx_deg,
            delay_s=self.tau_los_s,
            is_los=True,
        )


@dataclass(frozen=True)
class CodecScalers:
    """Excess-gain and excess-delay scalers, both pinned at 0"""
    gain: MinMaxScaler
    delay: MinMaxScaler
    angle_scale_deg: float = ANGLE_SCALE_DEG


def friis_loss(d3d_m, f_hz):
    """Free-space loss in dB"""
    d = np.asarray(d3d_m, dtype=float)
    if np.any(~(d > 0)) or not f_hz > 0:
        raise InvalidConditionError(f"Friis loss needs positive distance and frequency (d={d3d_m}, f={f_hz})")
    loss = 20.0 * np.log10(4.0 * np.pi * d * f_hz / SPEED_OF_LIGHT)
    return float(loss) if loss.ndim == 0 else loss


def los_directions(displacements: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    LOS angles and delays for many displacements

    Returns an (N, 4) array ordered like the path array angle columns
    (aoa az, aoa el, aod az, aod el) and the (N,) LOS delays in seconds.
    Arrival points back along d (towards the UAV), departure along -d.
    """
    d = np.atleast_2d(np.asarray(displacements, dtype=float))
    d3d = np.sqrt(np.sum(d * d, axis=1))
    if np.any(~(d3d > 0)):
        raise InvalidConditionError("Zero displacement between UAV and gNB")
    rx_az, rx_el = angles_from_direction(d)
    tx_az, tx_el = angles_from_direction(-d)
    angles = np.column_stack([rx_az, rx_el, tx_az, tx_el])
    return angles, d3d / SPEED_OF_LIGHT


def los_geometry(d, f_hz: float = DEFAULT_CARRIER_HZ) -> LosGeometry:
    vec = np.asarray(d, dtype=float).reshape(1, 3)
    angles, tau = los_directions(vec)
    rx_az, rx_el, tx_az, tx_el = (float(a) for a in angles[0])
    return LosGeometry(
        phi_tx_deg=tx_az,
        theta_tx_deg=tx_el,
        phi_rx_deg=rx_az,
        theta_rx_deg=rx_el,
        tau_los_s=float(tau[0]),
        loss_los_db=friis_loss(float(np.sqrt(np.sum(vec * vec))), f_hz),
    )


def fold_elevation(el):
    """Reflect elevations into [0, 180]"""
    e = np.mod(np.asarray(el, dtype=float), 360.0)
    return np.where(e > 180.0, 360.0 - e, e)


def strip_los(path_arrays: np.ndarray, los_flags: np.ndarray) -> np.ndarray:
    """Drop entry 0 of LOS links and shift the NLOS paths up"""
    arr = np.array(path_arrays, dtype=float, copy=True)
    flags = np.asarray(los_flags, dtype=bool)
    if flags.any():
        arr[flags, :-1] = arr[flags, 1:]
        arr[flags, -1] = ABSENT_ROW
    return arr


def nlos_only(paths: PathSet) -> PathSet:
    return PathSet.from_present(e for e in paths.entries if e.is_present and not e.is_los)


def _excess_delays(arr: np.ndarray, tau: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, arr[..., DELAY] - tau[:, None])


def fit_codec_scalers(train: Dataset) -> CodecScalers:
    """Gain and delay limits over the training NLOS paths (lower limits pinned at 0)"""
    arr = strip_los(train.path_arrays, train.los)
    present = arr[..., LOSS] < MAX_LOSS_DB
    if not present.any():
        raise EmptyDatasetError("Training data has no NLOS paths to fit codec scalers")
    _, tau = los_directions(train.conditions)
    gains = MAX_LOSS_DB - arr[..., LOSS][present]
    excess = _excess_delays(arr, tau)[present]
    scalers = CodecScalers(
        gain=minmax_fit(gains.reshape(-1, 1), pinned_lower=[0.0]),
        delay=minmax_fit(excess.reshape(-1, 1), pinned_lower=[0.0]),
    )
    logger.info(f"Codec scalers fitted on {int(present.sum())} NLOS paths: "
                f"max excess gain {scalers.gain.upper[0]:.2f} dB, "
                f"max excess delay {scalers.delay.upper[0] * 1e9:.1f} ns")
    return scalers


def encode_nlos_batch(nlos_arrays: np.ndarray, displacements: np.ndarray,
                      scalers: CodecScalers) -> np.ndarray:
    """(N, 20, 6) NLOS path arrays -> (N, 120) path-major normalized vectors"""
    arr = np.asarray(nlos_arrays, dtype=float)
    los_angles, tau = los_directions(displacements)
    present = arr[..., LOSS] < MAX_LOSS_DB

    gain = minmax_apply(scalers.gain, (MAX_LOSS_DB - arr[..., LOSS])[..., None])[..., 0]
    rel = wrap_angle_deg(arr[..., AOA_AZ:AOD_EL + 1] - los_angles[:, None, :]) / scalers.angle_scale_deg
    excess = minmax_apply(scalers.delay, _excess_delays(arr, tau)[..., None])[..., 0]

    blocks = np.concatenate([gain[..., None], rel, excess[..., None]], axis=-1)
    blocks = np.where(present[..., None], blocks, 0.0)
    return blocks.reshape(arr.shape[0], ENCODED_SIZE)


def encode_nlos(paths: PathSet, d, scalers: CodecScalers) -> np.ndarray:
    if paths.has_los:
        raise InvalidConditionError("encode_nlos expects a path set with the LOS entry removed")
    return encode_nlos_batch(paths.to_array()[None], np.asarray(d, dtype=float).reshape(1, 3), scalers)[0]


def decode_nlos_batch(y: np.ndarray, displacements: np.ndarray, scalers: CodecScalers,
                      absent_eps: float = DEFAULT_ABSENT_EPS) -> np.ndarray:
    """(N, 120) normalized vectors -> (N, 20, 6) NLOS path arrays, present paths first"""
    blocks = np.asarray(y, dtype=float).reshape(-1, NUM_PATHS, PARAMS_PER_PATH)
    los_angles, tau = los_directions(displacements)

    gain = np.clip(blocks[..., 0], 0.0, 1.0)
    rel = np.clip(blocks[..., 1:5], -1.0, 1.0)
    excess = np.clip(blocks[..., 5], 0.0, 1.0)
    present = gain > absent_eps

    loss = MAX_LOSS_DB - minmax_invert(scalers.gain, gain[..., None])[..., 0]
    angles = rel * scalers.angle_scale_deg + los_angles[:, None, :]
    angles[..., [0, 2]] = wrap_angle_deg(angles[..., [0, 2]])
    angles[..., [1, 3]] = fold_elevation(angles[..., [1, 3]])
    delay = tau[:, None] + minmax_invert(scalers.delay, excess[..., None])[..., 0]

    out = np.concatenate([loss[..., None], angles, delay[..., None]], axis=-1)
    out = np.where(present[..., None], out, ABSENT_ROW)
    order = np.argsort(~present, axis=1, kind="stable")
    return np.take_along_axis(out, order[..., None], axis=1)


def decode_nlos(y, d, scalers: CodecScalers, absent_eps: float = DEFAULT_ABSENT_EPS) -> PathSet:
    arr = decode_nlos_batch(np.asarray(y, dtype=float).reshape(1, -1),
                            np.asarray(d, dtype=float).reshape(1, 3), scalers, absent_eps)[0]
    return PathSet.from_array(arr)


def assemble_full_pathset(nlos: PathSet, state: LinkState, d, f_hz: float = DEFAULT_CARRIER_HZ) -> PathSet:
    """Add the deterministic LOS path for LOS links; NoLink gives an all-absent set"""
    if nlos.has_los:
        raise InvalidConditionError("NLOS path set already contains a LOS entry")
    if state == LinkState.NO_LINK:
        return PathSet.empty()
    if state == LinkState.NLOS:
        return nlos
    others = nlos.present
    if len(others) >= NUM_PATHS:
        weakest = max(range(len(others)), key=lambda k: others[k].loss_db)
        others = others[:weakest] + others[weakest + 1:]
    return PathSet.from_present([los_geometry(d, f_hz).as_entry()] + others)
