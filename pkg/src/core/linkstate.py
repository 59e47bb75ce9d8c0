"""
Link State - First generative stage: condition transform, state classifier and state sampling
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.core.domain import Dataset, GnbType, LinkCondition, LinkState
from src.core.errors import InvalidConditionError
from src.core.numerics import (
    DenseNet, MinMaxScaler, adam_step, backward, forward, forward_trace, init_adam,
    init_dense_net, iterate_minibatches, make_rng, mean_cross_entropy, minmax_apply, minmax_fit,
)
from src.utils.run_config import LinkStateConfig

logger = logging.getLogger(__name__)

LINK_STATE_LAYERS = (5, 25, 10, 3)
LINK_STATE_STREAM = 1


@dataclass(frozen=True)
class LinkStateModel:
    classifier: DenseNet
    scaler: MinMaxScaler
    loss_history: Tuple[float, ...] = field(default_factory=tuple)


def state_condition_matrix(displacements: np.ndarray, dedicated: np.ndarray) -> np.ndarray:
    """
    Pre-scale state condition vectors for many links

    Columns: [c_one, d3D*std, dz*std, d3D*ded, dz*ded]
    """
    d = np.atleast_2d(np.asarray(displacements, dtype=float))
    ded = np.asarray(dedicated, dtype=bool).reshape(-1)
    d3d = np.sqrt(np.sum(d * d, axis=1))
    if np.any(~(d3d > 0)):
        raise InvalidConditionError("Zero displacement between UAV and gNB")
    dz = d[:, 2]
    std = (~ded).astype(float)
    dd = ded.astype(float)
    return np.column_stack([dd, d3d * std, dz * std, d3d * dd, dz * dd])


def transform_state_condition(u: LinkCondition) -> np.ndarray:
    return state_condition_matrix(u.displacement.reshape(1, 3), np.array([u.is_dedicated]))[0]


def train_link_state(train: Dataset, cfg: LinkStateConfig, seed: int,
                     show_progress: bool = False) -> LinkStateModel:
    """Fit the condition scaler, then train the classifier with Adam on cross entropy"""
    x_raw = state_condition_matrix(train.conditions, train.dedicated)
    labels = train.states
    scaler = minmax_fit(x_raw)
    x = minmax_apply(scaler, x_raw)

    rng = make_rng(seed, LINK_STATE_STREAM)
    net = init_dense_net(LINK_STATE_LAYERS, rng, output_activation="softmax")
    opt = init_adam(net.params(), cfg.learning_rate)
    counts = np.bincount(labels, minlength=3)
    logger.info(f"Training link-state classifier on {len(train)} links "
                f"(LOS/NLOS/NoLink = {counts[0]}/{counts[1]}/{counts[2]})")

    history: List[float] = []
    for _ in tqdm(range(cfg.epochs), desc="link state", disable=not show_progress):
        total = 0.0
        for idx in iterate_minibatches(len(x), cfg.batch_size, rng):
            trace = forward_trace(net, x[idx])
            loss, grad = mean_cross_entropy(trace.output, labels[idx])
            grads = backward(net, x[idx], grad, trace)
            params, opt = adam_step(opt, net.params(), grads.params())
            net = net.with_params(params)
            total += loss * len(idx)
        history.append(total / len(x))

    logger.info(f"Link-state training done: loss {history[0]:.4f} -> {history[-1]:.4f}")
    return LinkStateModel(classifier=net, scaler=scaler, loss_history=tuple(history))


def predict_state_probs(model: LinkStateModel, u: LinkCondition) -> np.ndarray:
    """Probabilities in the order (LOS, NLOS, NoLink)"""
    return forward(model.classifier, minmax_apply(model.scaler, transform_state_condition(u)))


def predict_state_probs_batch(model: LinkStateModel, displacements: np.ndarray,
                              dedicated: np.ndarray) -> np.ndarray:
    x = minmax_apply(model.scaler, state_condition_matrix(displacements, dedicated))
    return forward(model.classifier, x)


def sample_state(probs, z_state: float) -> LinkState:
    p = np.asarray(probs, dtype=float)
    if z_state < p[0]:
        return LinkState.LOS
    if z_state < p[0] + p[1]:
        return LinkState.NLOS
    return LinkState.NO_LINK


def uav_altitudes(data: Dataset, standard_height_m: float = 2.0,
                  dedicated_height_m: float = 30.0) -> np.ndarray:
    """Absolute UAV height: dz plus the gNB mast height of the link's type"""
    gnb_h = np.where(data.dedicated, dedicated_height_m, standard_height_m)
    return data.conditions[:, 2] + gnb_h


def empirical_plos_curve(data: Dataset, bin_width_m: float = 20.0, group_by_altitude: bool = False,
                         standard_height_m: float = 2.0, dedicated_height_m: float = 30.0,
                         max_d2d_m: Optional[float] = None) -> pd.DataFrame:
    """
    Binned LOS fraction versus horizontal distance, per gNB type

    NoLink links count as non-LOS. Empty bins are kept with p_los = NaN and
    empty = True. With group_by_altitude the curve is further split by
    absolute UAV altitude.
    """
    d = data.conditions
    d2d = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2)
    top = max_d2d_m if max_d2d_m is not None else float(d2d.max())
    n_bins = max(1, int(np.ceil(top / bin_width_m)))
    edges = np.arange(n_bins + 1) * bin_width_m
    bins = np.clip(np.floor(d2d / bin_width_m).astype(int), 0, n_bins - 1)
    altitude = np.round(uav_altitudes(data, standard_height_m, dedicated_height_m), 3)

    rows = []
    for gnb_type in GnbType:
        type_mask = data.dedicated == (gnb_type == GnbType.DEDICATED)
        if not type_mask.any():
            continue
        groups = np.unique(altitude[type_mask]) if group_by_altitude else [None]
        for alt in groups:
            mask = type_mask if alt is None else type_mask & (altitude == alt)
            counts = np.bincount(bins[mask], minlength=n_bins)
            los = np.bincount(bins[mask], weights=data.los[mask].astype(float), minlength=n_bins)
            for b in range(n_bins):
                rows.append({
                    'gnb_type': gnb_type.value,
                    'altitude_m': np.nan if alt is None else float(alt),
                    'd2d_lo_m': edges[b],
                    'd2d_hi_m': edges[b + 1],
                    'n_links': int(counts[b]),
                    'p_los': los[b] / counts[b] if counts[b] > 0 else np.nan,
                    'empty': bool(counts[b] == 0),
                })
    return pd.DataFrame(rows)
