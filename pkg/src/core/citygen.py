"""
City Generator - Synthetic link dataset with analytically known statistics, and train/test split
"""

import logging
from typing import Tuple

import numpy as np
from tqdm import tqdm

from src.core.domain import (
    DEFAULT_CARRIER_HZ, NUM_PATHS, Dataset, GnbType, LinkCondition, LinkRecord, LinkState, PathEntry, PathSet,
    wrap_angle_deg,
)
from src.core.gpp_baseline import condition_matrix, plos_3gpp_array
from src.core.linkstate import sample_state
from src.core.numerics import make_rng
from src.core.pathcodec import fold_elevation, los_geometry
from src.utils.run_config import AngularSpreadLaw, OracleConfig

logger = logging.getLogger(__name__)

CITY_STREAM = 4
SPLIT_STREAM = 5
MAX_PRESENT_LOSS_DB = 199.0


def angular_spread_deg(law: AngularSpreadLaw, d3d_m):
    """Laplacian scale shrinking from max_deg towards min_deg with distance"""
    return law.min_deg + (law.max_deg - law.min_deg) * np.exp(-np.asarray(d3d_m, dtype=float) / law.decay_m)


def gnb_height(cfg: OracleConfig, dedicated) -> np.ndarray:
    return np.where(dedicated, cfg.dedicated_height_m, cfg.standard_height_m)


def oracle_state_probs(cfg: OracleConfig, displacements: np.ndarray, dedicated: np.ndarray) -> np.ndarray:
    """
    Exact (LOS, NLOS, NoLink) probabilities of the oracle for many links

    Links beyond nolink_range_m are NoLink with probability nolink_prob;
    otherwise LOS follows the per-type 3GPP-family curve at the absolute UAV height.
    """
    d = np.atleast_2d(np.asarray(displacements, dtype=float))
    ded = np.asarray(dedicated, dtype=bool).reshape(-1)
    h_gnb = gnb_height(cfg, ded)
    h = np.maximum(d[:, 2] + h_gnb, 1e-3)
    d2d = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2)
    cond = condition_matrix(h, d2d, h_gnb)
    plos = np.where(ded, plos_3gpp_array(cond, cfg.dedicated_alpha), plos_3gpp_array(cond, cfg.standard_alpha))
    far = np.sqrt(np.sum(d * d, axis=1)) > cfg.nolink_range_m
    p_nolink = np.where(far, cfg.nolink_prob, 0.0)
    p_los = (1.0 - p_nolink) * plos
    return np.column_stack([p_los, 1.0 - p_los - p_nolink, p_nolink])


def _nlos_paths(cfg: OracleConfig, state: LinkState, d: np.ndarray, friis_db: float, geom,
                rng: np.random.Generator):
    d3d = float(np.sqrt(np.sum(d * d)))
    if state == LinkState.LOS:
        law = cfg.los_link_nlos_paths
        count = rng.poisson(cfg.los_link_mean_paths)
    else:
        law = cfg.nlos_link_paths
        count = 1 + rng.poisson(max(cfg.nlos_link_mean_paths - 1.0, 0.0))
    count = int(min(count, NUM_PATHS - 1))
    if count == 0:
        return []

    base = law.intercept_db + 10.0 * law.exponent * np.log10(d3d) + rng.normal(0.0, law.shadow_db)
    excess = np.sort(rng.exponential(cfg.path_excess_db, count))
    if state == LinkState.NLOS:
        excess -= excess[0]
    loss = np.clip(base + excess, friis_db + 1.0, MAX_PRESENT_LOSS_DB)

    b_aoa = angular_spread_deg(cfg.aoa_spread, d3d)
    b_aod = angular_spread_deg(cfg.aod_spread, d3d)
    aoa_az = wrap_angle_deg(geom.phi_rx_deg + rng.laplace(0.0, b_aoa, count))
    aoa_el = fold_elevation(geom.theta_rx_deg + rng.laplace(0.0, b_aoa, count))
    aod_az = wrap_angle_deg(geom.phi_tx_deg + rng.laplace(0.0, b_aod, count))
    aod_el = fold_elevation(geom.theta_tx_deg + rng.laplace(0.0, b_aod, count))
    delay = geom.tau_los_s + rng.exponential(cfg.excess_delay_mean_ns * 1e-9, count)

    order = np.argsort(loss, kind="stable")
    return [PathEntry(float(loss[k]), float(aoa_az[k]), float(aoa_el[k]), float(aod_az[k]),
                      float(aod_el[k]), float(delay[k])) for k in order]


def generate_link_record(cfg: OracleConfig, rng: np.random.Generator, env_id: str,
                         carrier_hz: float) -> LinkRecord:
    dedicated = bool(rng.uniform() < cfg.dedicated_fraction)
    gnb_type = GnbType.DEDICATED if dedicated else GnbType.STANDARD
    gnb_xy = rng.uniform(0.0, cfg.area_m, 2)
    uav_xy = rng.uniform(0.0, cfg.area_m, 2)
    altitude = float(rng.choice(cfg.uav_altitudes_m))
    d = np.array([uav_xy[0] - gnb_xy[0], uav_xy[1] - gnb_xy[1], altitude - float(gnb_height(cfg, dedicated))])
    cond = LinkCondition(float(d[0]), float(d[1]), float(d[2]), gnb_type)

    probs = oracle_state_probs(cfg, d.reshape(1, 3), np.array([dedicated]))[0]
    state = sample_state(probs, float(rng.uniform()))
    if state == LinkState.NO_LINK:
        return LinkRecord(env_id, cond, PathSet.empty())

    geom = los_geometry(d, carrier_hz)
    paths = _nlos_paths(cfg, state, d, geom.loss_los_db, geom, rng)
    if state == LinkState.LOS:
        paths = [geom.as_entry()] + paths
    return LinkRecord(env_id, cond, PathSet.from_present(paths))


def generate_city(cfg: OracleConfig, n_links: int, seed: int, env_id: str = "oracle-city",
                  carrier_hz: float = DEFAULT_CARRIER_HZ, show_progress: bool = False) -> Dataset:
    """Oracle dataset; link i is drawn from its own substream so the result is seed-deterministic"""
    records = tuple(
        generate_link_record(cfg, make_rng(seed, CITY_STREAM, i), env_id, carrier_hz)
        for i in tqdm(range(n_links), desc="oracle city", disable=not show_progress)
    )
    data = Dataset(records, carrier_hz=carrier_hz)
    counts = np.bincount(data.states, minlength=3)
    logger.info(f"Oracle city '{env_id}' generated: {n_links} links "
                f"(LOS/NLOS/NoLink = {counts[0]}/{counts[1]}/{counts[2]})")
    return data


def split(data: Dataset, fraction: float = 0.75, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """Seeded shuffle, then the first round(fraction * n) links train and the rest test"""
    n = len(data)
    order = make_rng(seed, SPLIT_STREAM).permutation(n)
    n_train = int(round(fraction * n))
    return data.subset(order[:n_train]), data.subset(order[n_train:])
