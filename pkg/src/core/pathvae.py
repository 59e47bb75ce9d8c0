"""
Path VAE - Conditional variational autoencoder over normalized NLOS path vectors
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from tqdm import tqdm

from src.core.domain import Dataset, LinkCondition, LinkState
from src.core.errors import EmptyDatasetError, InvalidConditionError
from src.core.numerics import (
    DenseNet, Gradients, MinMaxScaler, adam_step, backward, forward, forward_trace, init_adam,
    init_dense_net, iterate_minibatches, make_rng, minmax_apply, minmax_fit,
)
from src.core.pathcodec import ENCODED_SIZE, CodecScalers, encode_nlos_batch, strip_los
from src.utils.run_config import VaeConfig

logger = logging.getLogger(__name__)

CONDITION_SIZE = 5
LOGVAR_MIN = -10.0
LOGVAR_MAX = 3.0
LOG_2PI = float(np.log(2.0 * np.pi))
VAE_STREAM = 2


@dataclass(frozen=True)
class VaeModel:
    encoder: DenseNet
    decoder: DenseNet
    scaler: MinMaxScaler
    latent_dim: int = 20
    loss_history: Tuple[float, ...] = field(default_factory=tuple)


def encoder_layers(latent_dim: int) -> Tuple[int, ...]:
    return (CONDITION_SIZE + ENCODED_SIZE, 200, 80, 2 * latent_dim)


def decoder_layers(latent_dim: int) -> Tuple[int, ...]:
    return (CONDITION_SIZE + latent_dim, 80, 200, 2 * ENCODED_SIZE)


def init_vae(rng: np.random.Generator, latent_dim: int = 20,
             scaler: MinMaxScaler = MinMaxScaler()) -> VaeModel:
    return VaeModel(
        encoder=init_dense_net(encoder_layers(latent_dim), rng),
        decoder=init_dense_net(decoder_layers(latent_dim), rng),
        scaler=scaler,
        latent_dim=latent_dim,
    )


def path_condition_matrix(displacements: np.ndarray, dedicated: np.ndarray,
                          states: np.ndarray) -> np.ndarray:
    """Pre-scale rows [c_one, d3D, 10 log10 d3D, dz, s] with s = 1 for LOS"""
    d = np.atleast_2d(np.asarray(displacements, dtype=float))
    states = np.asarray(states, dtype=int).reshape(-1)
    if np.any(states == LinkState.NO_LINK):
        raise InvalidConditionError("NoLink links have no path condition")
    d3d = np.sqrt(np.sum(d * d, axis=1))
    if np.any(~(d3d > 0)):
        raise InvalidConditionError("Zero displacement between UAV and gNB")
    ded = np.asarray(dedicated, dtype=float).reshape(-1)
    s = (states == LinkState.LOS).astype(float)
    return np.column_stack([ded, d3d, 10.0 * np.log10(d3d), d[:, 2], s])


def path_condition_vector(u: LinkCondition, s: LinkState) -> np.ndarray:
    return path_condition_matrix(u.displacement.reshape(1, 3), np.array([u.is_dedicated]), np.array([int(s)]))[0]


def transform_path_condition(u: LinkCondition, s: LinkState, scaler: MinMaxScaler) -> np.ndarray:
    return minmax_apply(scaler, path_condition_vector(u, s))


def encode(model: VaeModel, v_path, y) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior means and log-variances of z"""
    out = forward(model.encoder, np.concatenate([v_path, y], axis=-1))
    return out[..., :model.latent_dim], out[..., model.latent_dim:]


def reparameterize(mu, logvar, eps) -> np.ndarray:
    return np.asarray(mu) + np.exp(0.5 * np.asarray(logvar)) * np.asarray(eps)


def decode(model: VaeModel, v_path, z) -> Tuple[np.ndarray, np.ndarray]:
    """Output means and clamped log-variances of y"""
    out = forward(model.decoder, np.concatenate([v_path, z], axis=-1))
    return out[..., :ENCODED_SIZE], np.clip(out[..., ENCODED_SIZE:], LOGVAR_MIN, LOGVAR_MAX)


def sample_y(model: VaeModel, v_path, z_nlos, z_out) -> np.ndarray:
    mu_y, logvar_y = decode(model, v_path, z_nlos)
    return mu_y + np.exp(0.5 * logvar_y) * np.asarray(z_out)


def kl_term(mu_z, logvar_z) -> np.ndarray:
    return 0.5 * np.sum(np.square(mu_z) + np.exp(logvar_z) - logvar_z - 1.0, axis=-1)


def reconstruction_term(y, mu_y, logvar_y) -> np.ndarray:
    return 0.5 * np.sum(np.square(y - mu_y) * np.exp(-logvar_y) + logvar_y + LOG_2PI, axis=-1)


def elbo_loss(model: VaeModel, v_path, y, eps) -> float:
    """Negative ELBO (batch mean when given matrices)"""
    mu_z, logvar_z = encode(model, v_path, y)
    z = reparameterize(mu_z, logvar_z, eps)
    mu_y, logvar_y = decode(model, v_path, z)
    return float(np.mean(reconstruction_term(y, mu_y, logvar_y) + kl_term(mu_z, logvar_z)))


def elbo_gradients(model: VaeModel, v_path: np.ndarray, y: np.ndarray,
                   eps: np.ndarray) -> Tuple[float, Gradients, Gradients]:
    """Mean negative ELBO over a batch and its encoder/decoder gradients"""
    v_path, y, eps = np.atleast_2d(v_path), np.atleast_2d(y), np.atleast_2d(eps)
    batch = y.shape[0]
    latent = model.latent_dim

    enc_in = np.concatenate([v_path, y], axis=1)
    enc_trace = forward_trace(model.encoder, enc_in)
    mu_z = enc_trace.output[:, :latent]
    logvar_z = enc_trace.output[:, latent:]
    std_z = np.exp(0.5 * logvar_z)
    z = mu_z + std_z * eps

    dec_in = np.concatenate([v_path, z], axis=1)
    dec_trace = forward_trace(model.decoder, dec_in)
    mu_y = dec_trace.output[:, :ENCODED_SIZE]
    raw_logvar_y = dec_trace.output[:, ENCODED_SIZE:]
    logvar_y = np.clip(raw_logvar_y, LOGVAR_MIN, LOGVAR_MAX)

    resid = y - mu_y
    inv_var = np.exp(-logvar_y)
    loss = float(np.mean(
        0.5 * np.sum(resid * resid * inv_var + logvar_y + LOG_2PI, axis=1) + kl_term(mu_z, logvar_z)))

    inside = (raw_logvar_y > LOGVAR_MIN) & (raw_logvar_y < LOGVAR_MAX)
    d_mu_y = -resid * inv_var / batch
    d_logvar_y = 0.5 * (1.0 - resid * resid * inv_var) * inside / batch
    dec_grads = backward(model.decoder, dec_in, np.concatenate([d_mu_y, d_logvar_y], axis=1), dec_trace)

    d_z = dec_grads.input[:, CONDITION_SIZE:]
    d_mu_z = d_z + mu_z / batch
    d_logvar_z = d_z * eps * 0.5 * std_z + 0.5 * (np.exp(logvar_z) - 1.0) / batch
    enc_grads = backward(model.encoder, enc_in, np.concatenate([d_mu_z, d_logvar_z], axis=1), enc_trace)
    return loss, enc_grads, dec_grads


def training_targets(data: Dataset, codec: CodecScalers) -> Tuple[np.ndarray, np.ndarray]:
    """Pre-scale path conditions and encoded NLOS vectors of all non-NoLink links"""
    mask = data.states != LinkState.NO_LINK
    if not mask.any():
        raise EmptyDatasetError("No LOS or NLOS links available for VAE training")
    cond = path_condition_matrix(data.conditions[mask], data.dedicated[mask], data.states[mask])
    nlos = strip_los(data.path_arrays[mask], data.los[mask])
    return cond, encode_nlos_batch(nlos, data.conditions[mask], codec)


def train_vae(train: Dataset, codec: CodecScalers, cfg: VaeConfig, seed: int,
              show_progress: bool = False) -> VaeModel:
    """Fit the path-condition scaler and train encoder and decoder jointly on the mean negative ELBO"""
    cond_raw, y = training_targets(train, codec)
    scaler = minmax_fit(cond_raw)
    v = minmax_apply(scaler, cond_raw)

    rng = make_rng(seed, VAE_STREAM)
    model = init_vae(rng, cfg.latent_dim, scaler)
    n_enc = len(model.encoder.params())
    opt = init_adam(model.encoder.params() + model.decoder.params(), cfg.learning_rate)
    logger.info(f"Training path VAE on {len(y)} links for {cfg.epochs} epochs")

    history: List[float] = []
    encoder, decoder = model.encoder, model.decoder
    for _ in tqdm(range(cfg.epochs), desc="path vae", disable=not show_progress):
        total = 0.0
        for idx in iterate_minibatches(len(y), cfg.batch_size, rng):
            eps = rng.standard_normal((len(idx), cfg.latent_dim))
            current = VaeModel(encoder, decoder, scaler, cfg.latent_dim)
            loss, enc_grads, dec_grads = elbo_gradients(current, v[idx], y[idx], eps)
            params, opt = adam_step(opt, encoder.params() + decoder.params(),
                                    enc_grads.params() + dec_grads.params())
            encoder = encoder.with_params(params[:n_enc])
            decoder = decoder.with_params(params[n_enc:])
            total += loss * len(idx)
        history.append(total / len(y))

    logger.info(f"VAE training done: loss {history[0]:.3f} -> {history[-1]:.3f}")
    return VaeModel(encoder, decoder, scaler, cfg.latent_dim, tuple(history))
