"""
Generative Model - Two-stage composition x = g(u, z), latent draws and batch generation
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.domain import DEFAULT_CARRIER_HZ, Dataset, LinkCondition, LinkRecord, LinkState, PathSet, validate_record
from src.core.errors import ModelNotTrainedError, RecordValidationError
from src.core.numerics import make_rng
from src.core.linkstate import LinkStateModel, predict_state_probs, sample_state, train_link_state
from src.core.pathcodec import (
    DEFAULT_ABSENT_EPS, ENCODED_SIZE, CodecScalers, assemble_full_pathset, decode_nlos, fit_codec_scalers,
)
from src.core.pathvae import VaeModel, sample_y, train_vae, transform_path_condition
from src.types import NetworkSummary
from src.utils.debug import is_debug
from src.utils.run_config import LinkStateConfig, VaeConfig

logger = logging.getLogger(__name__)

MODEL_VERSION = 1


@dataclass(frozen=True)
class GenerativeModel:
    link_state: LinkStateModel
    vae: VaeModel
    codec: CodecScalers
    carrier_hz: float = DEFAULT_CARRIER_HZ
    env_id: str = ""
    absent_eps: float = DEFAULT_ABSENT_EPS
    version: int = MODEL_VERSION


@dataclass(frozen=True)
class LatentDraw:
    z_state: float
    z_nlos: np.ndarray
    z_out: np.ndarray


def draw_latent(rng: np.random.Generator, latent_dim: int = 20) -> LatentDraw:
    return LatentDraw(
        z_state=float(rng.uniform()),
        z_nlos=rng.standard_normal(latent_dim),
        z_out=rng.standard_normal(ENCODED_SIZE),
    )


def _check_trained(model: GenerativeModel) -> None:
    missing = []
    if model is None or model.link_state is None or not model.link_state.scaler.fitted:
        missing.append("link-state classifier")
    if model is None or model.vae is None or not model.vae.scaler.fitted:
        missing.append("path VAE")
    if model is None or model.codec is None or not model.codec.gain.fitted:
        missing.append("codec scalers")
    if missing:
        raise ModelNotTrainedError(f"Generative model is missing: {', '.join(missing)}")


def train_generative_model(train: Dataset, link_cfg: LinkStateConfig, vae_cfg: VaeConfig, seed: int,
                           show_progress: bool = False) -> GenerativeModel:
    """Fit codec scalers, the link-state classifier and the path VAE on one training split"""
    codec = fit_codec_scalers(train)
    link_state = train_link_state(train, link_cfg, seed, show_progress)
    vae = train_vae(train, codec, vae_cfg, seed, show_progress)
    return GenerativeModel(
        link_state=link_state,
        vae=vae,
        codec=codec,
        carrier_hz=train.carrier_hz,
        env_id=train.env_id,
        absent_eps=vae_cfg.absent_eps,
    )


def generate_link_with_state(model: GenerativeModel, u: LinkCondition,
                             draw: LatentDraw) -> Tuple[LinkState, PathSet]:
    _check_trained(model)
    u.require_nonzero()
    state = sample_state(predict_state_probs(model.link_state, u), draw.z_state)
    if state == LinkState.NO_LINK:
        return state, PathSet.empty()

    v_path = transform_path_condition(u, state, model.vae.scaler)
    y = sample_y(model.vae, v_path, draw.z_nlos, draw.z_out)
    nlos = decode_nlos(y, u.displacement, model.codec, model.absent_eps)
    paths = assemble_full_pathset(nlos, state, u.displacement, model.carrier_hz)

    if is_debug():
        report = validate_record(LinkRecord(model.env_id, u, paths))
        if not report['valid']:
            raise RecordValidationError("Generated path set violates record invariants", report['findings'])
    return state, paths


def generate_link(model: GenerativeModel, u: LinkCondition, draw: LatentDraw) -> PathSet:
    """Sample the link state, then the NLOS paths, then add the LOS path when present"""
    return generate_link_with_state(model, u, draw)[1]


def generate_batch(model: GenerativeModel, conditions: Sequence[LinkCondition], seed: int,
                   stream_key: Tuple[int, ...] = ()) -> List[PathSet]:
    """One independent draw per condition from substream (seed, *stream_key, index)"""
    _check_trained(model)
    latent_dim = model.vae.latent_dim
    out = []
    for i, u in enumerate(conditions):
        rng = make_rng(seed, *stream_key, i)
        out.append(generate_link(model, u, draw_latent(rng, latent_dim)))
    return out


def generate_dataset(model: GenerativeModel, conditions: Sequence[LinkCondition], seed: int,
                     env_id: Optional[str] = None) -> Dataset:
    """Generated links wrapped as a dataset in the model's environment"""
    paths = generate_batch(model, conditions, seed)
    label = env_id if env_id is not None else model.env_id
    return Dataset(tuple(LinkRecord(label, u, p) for u, p in zip(conditions, paths)), carrier_hz=model.carrier_hz)


def model_summary(model: GenerativeModel) -> List[NetworkSummary]:
    """Layer sizes and parameter counts of every network in the model"""
    nets = [
        ("link_state", model.link_state.classifier),
        ("vae_encoder", model.vae.encoder),
        ("vae_decoder", model.vae.decoder),
    ]
    return [{'name': name, 'layer_sizes': list(net.layer_sizes), 'parameters': net.parameter_count}
            for name, net in nets]
