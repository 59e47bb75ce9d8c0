"""
3GPP Baseline - Closed-form UMi-AV LOS probability and path loss, nominal and refitted

Condition matrices have columns [log10(h), d2D, h, h_gnb] where h is the
absolute UAV height. The 3D distance is sqrt(d2D^2 + (h - h_gnb)^2).
"""

import logging
from dataclasses import dataclass
from typing import Callable, ClassVar, List, Tuple

import numpy as np
from tqdm import tqdm

from src.core.domain import SPEED_OF_LIGHT, Dataset, LinkState
from src.core.errors import EmptyDatasetError, InvalidConditionError
from src.core.metrics import omni_pathloss_array
from src.core.numerics import adam_step, init_adam, iterate_minibatches, make_rng
from src.utils.run_config import GppConfig

logger = logging.getLogger(__name__)

H_MIN_M = 1.5
H_MAX_M = 300.0
H_LOW_MAX_M = 22.5
BCE_FLOOR = 1e-12
EXP_ARG_MAX = 50.0
GPP_STREAM = 3

NOMINAL_ALPHA = (18.0, 36.0, 294.05, -432.94, 233.98, -0.95)

# High-altitude LOS (4), high-altitude NLOS (4), street-canyon LOS incl. effective
# environment height (6), street-canyon NLOS (5)
NOMINAL_BETA = (
    30.9, 22.25, 0.5, 20.0,
    32.4, 43.2, 7.6, 20.0,
    32.4, 21.0, 20.0, 40.0, 9.5, 1.0,
    22.4, 35.3, 21.3, 0.3, 1.5,
)


@dataclass(frozen=True)
class GppParams:
    """Nominal values times fitted multipliers"""
    nominal: Tuple[float, ...]
    multipliers: Tuple[float, ...]
    provenance: str = "nominal"
    kind: ClassVar[str] = ""

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.nominal, dtype=float) * np.asarray(self.multipliers, dtype=float)


@dataclass(frozen=True)
class Alpha3GPP(GppParams):
    kind: ClassVar[str] = "plos"

    @classmethod
    def nominal_params(cls) -> "Alpha3GPP":
        return cls(NOMINAL_ALPHA, (1.0,) * len(NOMINAL_ALPHA))


@dataclass(frozen=True)
class Beta3GPP(GppParams):
    kind: ClassVar[str] = "pathloss"

    @classmethod
    def nominal_params(cls) -> "Beta3GPP":
        return cls(NOMINAL_BETA, (1.0,) * len(NOMINAL_BETA))


@dataclass(frozen=True)
class GppCondition:
    h_m: float
    d2d_m: float
    h_gnb_m: float

    @property
    def vector(self) -> np.ndarray:
        return np.array([np.log10(self.h_m), self.d2d_m, self.h_m, self.h_gnb_m])


def condition_matrix(h, d2d, h_gnb) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    return np.column_stack([np.log10(h), np.asarray(d2d, dtype=float), h, np.asarray(h_gnb, dtype=float)])


def dataset_conditions(data: Dataset, standard_height_m: float = 2.0,
                       dedicated_height_m: float = 30.0) -> Tuple[np.ndarray, np.ndarray]:
    """Condition matrix for every link plus the mask of links inside the validity range"""
    d = data.conditions
    h_gnb = np.where(data.dedicated, dedicated_height_m, standard_height_m)
    h = d[:, 2] + h_gnb
    valid = (h >= H_MIN_M) & (h <= H_MAX_M)
    safe_h = np.where(valid, h, H_MIN_M)
    return condition_matrix(safe_h, np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2), h_gnb), valid


def _check_height(cond: GppCondition) -> None:
    if not H_MIN_M <= cond.h_m <= H_MAX_M:
        raise InvalidConditionError(f"UAV height {cond.h_m} m outside 3GPP validity range [{H_MIN_M}, {H_MAX_M}]")


def plos_3gpp_array(cond: np.ndarray, alpha, with_grad: bool = False):
    """LOS probability per row; with_grad also returns dP/dalpha of shape (N, 6)"""
    a1, a2, a3, a4, a5, a6 = np.asarray(alpha, dtype=float)
    log_h, d2d, h = cond[:, 0], cond[:, 1], cond[:, 2]
    safe_d = np.maximum(d2d, BCE_FLOOR)
    low = h <= H_LOW_MAX_M

    d1_raw = a5 * log_h + a6
    d1 = np.where(low, a1, np.maximum(d1_raw, a1))
    p1 = np.where(low, a2, a3 * log_h + a4)
    p1 = np.where(np.abs(p1) < BCE_FLOOR, BCE_FLOOR, p1)
    decay = np.exp(np.minimum(-d2d / p1, EXP_ARG_MAX))
    far = d2d > d1
    raw = np.where(far, d1 / safe_d + decay * (1.0 - d1 / safe_d), 1.0)
    p = np.clip(raw, 0.0, 1.0)
    if not with_grad:
        return p

    active = far & (raw > 0.0) & (raw < 1.0)
    dp_dd1 = np.where(active, (1.0 - decay) / safe_d, 0.0)
    dp_dp1 = np.where(active, (1.0 - d1 / safe_d) * decay * d2d / (p1 * p1), 0.0)
    d1_from_a1 = low | (d1_raw < a1)
    grad = np.zeros((len(cond), 6))
    grad[:, 0] = dp_dd1 * d1_from_a1
    grad[:, 1] = np.where(low, dp_dp1, 0.0)
    grad[:, 2] = np.where(low, 0.0, dp_dp1 * log_h)
    grad[:, 3] = np.where(low, 0.0, dp_dp1)
    grad[:, 4] = dp_dd1 * (~d1_from_a1) * log_h
    grad[:, 5] = dp_dd1 * (~d1_from_a1)
    return p, grad


def plos_3gpp(cond: GppCondition, alpha) -> float:
    _check_height(cond)
    values = alpha.values if isinstance(alpha, GppParams) else alpha
    return float(plos_3gpp_array(cond.vector.reshape(1, 4), values)[0])


def pathloss_3gpp_array(cond: np.ndarray, states: np.ndarray, beta, f_hz: float, with_grad: bool = False):
    """Path loss per row for LOS/NLOS states; with_grad also returns dPL/dbeta of shape (N, 19)"""
    b = np.asarray(beta, dtype=float)
    log_h, d2d, h, h_gnb = cond[:, 0], cond[:, 1], cond[:, 2], cond[:, 3]
    d3d = np.maximum(np.sqrt(d2d ** 2 + (h - h_gnb) ** 2), 1.0)
    log_d = np.log10(d3d)
    log_f = np.log10(f_hz / 1e9)
    los = np.asarray(states) == LinkState.LOS
    low = h <= H_LOW_MAX_M
    n = len(cond)
    grad = np.zeros((n, len(b)))

    # high altitude
    hi_los = b[0] + (b[1] - b[2] * log_h) * log_d + b[3] * log_f
    hi_nlos_raw = b[4] + (b[5] - b[6] * log_h) * log_d + b[7] * log_f
    g_hi = np.column_stack([np.ones(n), log_d, -log_h * log_d, np.full(n, log_f)])

    # street canyon
    h_e = b[13]
    k = 4.0 * f_hz / SPEED_OF_LIGHT
    d_bp = k * (h_gnb - h_e) * (h - h_e)
    dh = h_gnb - h
    bp_arg = np.maximum(d_bp ** 2 + dh ** 2, BCE_FLOOR)
    pl1 = b[8] + b[9] * log_d + b[10] * log_f
    pl2 = b[8] + b[11] * log_d + b[10] * log_f - b[12] * np.log10(bp_arg)
    first_slope = d2d <= d_bp
    lo_los = np.where(first_slope, pl1, pl2)
    lo_nlos_raw = b[14] + b[15] * log_d + b[16] * log_f - b[17] * (h - b[18])

    los_pl = np.where(low, lo_los, hi_los)
    nlos_raw = np.where(low, lo_nlos_raw, hi_nlos_raw)
    use_nlos_formula = ~los & (nlos_raw > los_pl)
    pl = np.where(use_nlos_formula, nlos_raw, los_pl)
    if not with_grad:
        return pl

    los_rows = ~use_nlos_formula
    hi_rows = ~low
    grad[:, 0:4] = np.where((los_rows & hi_rows)[:, None], g_hi, 0.0)
    grad[:, 4:8] = np.where((use_nlos_formula & hi_rows)[:, None], g_hi, 0.0)

    lo_los_rows = los_rows & low
    d_bp_d_he = -k * ((h - h_e) + (h_gnb - h_e))
    d_log_bp_d_he = 2.0 * d_bp * d_bp_d_he / (bp_arg * np.log(10.0))
    grad[:, 8] = lo_los_rows
    grad[:, 9] = np.where(lo_los_rows & first_slope, log_d, 0.0)
    grad[:, 10] = np.where(lo_los_rows, log_f, 0.0)
    grad[:, 11] = np.where(lo_los_rows & ~first_slope, log_d, 0.0)
    grad[:, 12] = np.where(lo_los_rows & ~first_slope, -np.log10(bp_arg), 0.0)
    grad[:, 13] = np.where(lo_los_rows & ~first_slope, -b[12] * d_log_bp_d_he, 0.0)

    lo_nlos_rows = use_nlos_formula & low
    grad[:, 14] = lo_nlos_rows
    grad[:, 15] = np.where(lo_nlos_rows, log_d, 0.0)
    grad[:, 16] = np.where(lo_nlos_rows, log_f, 0.0)
    grad[:, 17] = np.where(lo_nlos_rows, -(h - b[18]), 0.0)
    grad[:, 18] = np.where(lo_nlos_rows, b[17], 0.0)
    return pl, grad


def pathloss_3gpp(cond: GppCondition, s: LinkState, beta, f_hz: float) -> float:
    _check_height(cond)
    if s == LinkState.NO_LINK:
        raise InvalidConditionError("3GPP path loss is defined for LOS or NLOS links only")
    values = beta.values if isinstance(beta, GppParams) else beta
    return float(pathloss_3gpp_array(cond.vector.reshape(1, 4), np.array([int(s)]), values, f_hz)[0])


def sample_pathloss_3gpp(cond: np.ndarray, alpha, beta, f_hz: float,
                         uniforms: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Draw LOS/NLOS from the 3GPP LOS probability, then evaluate the path loss (no shadowing)"""
    a = alpha.values if isinstance(alpha, GppParams) else alpha
    b = beta.values if isinstance(beta, GppParams) else beta
    p = plos_3gpp_array(cond, a)
    states = np.where(np.asarray(uniforms) < p, int(LinkState.LOS), int(LinkState.NLOS))
    return pathloss_3gpp_array(cond, states, b, f_hz), states


LossAndGrad = Callable[[np.ndarray, np.ndarray], Tuple[float, np.ndarray]]


def _fit_multipliers(loss_and_grad: LossAndGrad, nominal: Tuple[float, ...], n: int,
                     cfg: GppConfig, seed: int, desc: str, show_progress: bool) -> Tuple[np.ndarray, List[float]]:
    """Adam over multipliers of the nominal values, clamped after every step"""
    nominal_arr = np.asarray(nominal, dtype=float)
    multipliers = np.ones(len(nominal_arr))
    opt = init_adam([multipliers], cfg.learning_rate)
    rng = make_rng(seed, GPP_STREAM)
    history = []
    for _ in tqdm(range(cfg.epochs), desc=desc, disable=not show_progress):
        total = 0.0
        for idx in iterate_minibatches(n, cfg.batch_size, rng):
            loss, grad_values = loss_and_grad(idx, nominal_arr * multipliers)
            (multipliers,), opt = adam_step(opt, [multipliers], [grad_values * nominal_arr])
            multipliers = np.clip(multipliers, cfg.clamp_low, cfg.clamp_high)
            total += loss * len(idx)
        history.append(total / n)
    return multipliers, history


def fit_plos_arrays(cond: np.ndarray, labels: np.ndarray, cfg: GppConfig, seed: int,
                    show_progress: bool = False, provenance: str = "fitted") -> Alpha3GPP:
    """Minimize binary cross entropy of the 3GPP LOS probability against LOS labels"""
    if len(cond) == 0:
        raise EmptyDatasetError("No links to fit the LOS probability")
    y = np.asarray(labels, dtype=float)

    def bce(idx, alpha):
        p, dp = plos_3gpp_array(cond[idx], alpha, with_grad=True)
        pc = np.clip(p, BCE_FLOOR, 1.0 - BCE_FLOOR)
        t = y[idx]
        loss = float(-np.mean(t * np.log(pc) + (1.0 - t) * np.log(1.0 - pc)))
        dl_dp = -(t / pc - (1.0 - t) / (1.0 - pc)) / len(idx)
        return loss, dl_dp @ dp

    multipliers, history = _fit_multipliers(bce, NOMINAL_ALPHA, len(cond), cfg, seed, "3gpp plos", show_progress)
    logger.info(f"P_LOS refit on {len(cond)} links: BCE {history[0]:.4f} -> {history[-1]:.4f}")
    return Alpha3GPP(NOMINAL_ALPHA, tuple(float(m) for m in multipliers), provenance)


def fit_pathloss_arrays(cond: np.ndarray, states: np.ndarray, targets_db: np.ndarray, f_hz: float,
                        cfg: GppConfig, seed: int, show_progress: bool = False,
                        provenance: str = "fitted") -> Beta3GPP:
    """Minimize mean squared error of the 3GPP path loss against target losses"""
    if len(cond) == 0:
        raise EmptyDatasetError("No LOS or NLOS links to fit the path loss")
    t = np.asarray(targets_db, dtype=float)

    def mse(idx, beta):
        pl, dpl = pathloss_3gpp_array(cond[idx], states[idx], beta, f_hz, with_grad=True)
        err = pl - t[idx]
        return float(np.mean(err * err)), (2.0 * err / len(idx)) @ dpl

    multipliers, history = _fit_multipliers(mse, NOMINAL_BETA, len(cond), cfg, seed, "3gpp pathloss", show_progress)
    logger.info(f"Path-loss refit on {len(cond)} links: MSE {history[0]:.3f} -> {history[-1]:.3f} dB^2")
    return Beta3GPP(NOMINAL_BETA, tuple(float(m) for m in multipliers), provenance)


def _valid_conditions(data: Dataset, standard_height_m: float, dedicated_height_m: float) -> Tuple[np.ndarray, np.ndarray]:
    cond, valid = dataset_conditions(data, standard_height_m, dedicated_height_m)
    dropped = int((~valid).sum())
    if dropped:
        logger.warning(f"{dropped} links outside the 3GPP height range [{H_MIN_M}, {H_MAX_M}] m filtered")
    return cond, valid


def fit_plos(train: Dataset, cfg: GppConfig, seed: int, standard_height_m: float = 2.0,
             dedicated_height_m: float = 30.0, show_progress: bool = False) -> Alpha3GPP:
    """Refit alpha on a dataset; NoLink links count as non-LOS"""
    cond, valid = _valid_conditions(train, standard_height_m, dedicated_height_m)
    return fit_plos_arrays(cond[valid], train.los[valid], cfg, seed, show_progress,
                           provenance=f"fitted on {train.env_id} ({int(valid.sum())} links)")


def fit_pathloss(train: Dataset, cfg: GppConfig, seed: int, omni_mode: str = "strongest",
                 standard_height_m: float = 2.0, dedicated_height_m: float = 30.0,
                 show_progress: bool = False) -> Beta3GPP:
    """Refit beta on the omnidirectional path loss of LOS and NLOS links"""
    cond, valid = _valid_conditions(train, standard_height_m, dedicated_height_m)
    keep = valid & (train.states != LinkState.NO_LINK)
    targets = omni_pathloss_array(train.path_arrays[keep], mode=omni_mode)
    return fit_pathloss_arrays(cond[keep], train.states[keep], targets, train.carrier_hz, cfg, seed,
                               show_progress, provenance=f"fitted on {train.env_id} ({int(keep.sum())} links)")

