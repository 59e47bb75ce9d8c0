from dataclasses import replace

import numpy as np
import pytest

from src.core.citygen import generate_city, split
from src.core.domain import GnbType, LinkCondition, LinkState
from src.core.errors import InvalidConditionError
from src.core.numerics import minmax_fit
from src.core.pathcodec import ENCODED_SIZE, fit_codec_scalers
from src.core.pathvae import (
    CONDITION_SIZE, decode, elbo_gradients, elbo_loss, encode, init_vae, kl_term, path_condition_matrix,
    path_condition_vector, reparameterize, sample_y, train_vae, training_targets,
)
from src.utils.run_config import OracleConfig, VaeConfig


def random_vae(seed=0, latent_dim=20):
    rng = np.random.default_rng(seed)
    scaler = minmax_fit(rng.uniform(size=(10, CONDITION_SIZE)))
    return init_vae(rng, latent_dim, scaler)


def test_architecture_sizes():
    vae = random_vae()
    assert vae.encoder.layer_sizes == (125, 200, 80, 40)
    assert vae.decoder.layer_sizes == (25, 80, 200, 240)


def test_path_condition_vector():
    v = path_condition_vector(LinkCondition(30.0, 40.0, 0.0, GnbType.DEDICATED), LinkState.LOS)
    np.testing.assert_allclose(v, [1.0, 50.0, 10.0 * np.log10(50.0), 0.0, 1.0])
    v = path_condition_vector(LinkCondition(0.0, 0.0, 10.0), LinkState.NLOS)
    np.testing.assert_allclose(v, [0.0, 10.0, 10.0, 10.0, 0.0])


def test_path_condition_rejects_nolink_and_zero_displacement():
    with pytest.raises(InvalidConditionError):
        path_condition_vector(LinkCondition(1.0, 0.0, 0.0), LinkState.NO_LINK)
    with pytest.raises(InvalidConditionError):
        path_condition_matrix(np.zeros((1, 3)), np.array([True]), np.array([1]))


def test_kl_zero_only_at_standard_normal():
    assert kl_term(np.zeros(20), np.zeros(20)) == 0.0
    assert kl_term(np.full(20, 0.1), np.zeros(20)) > 0.0
    assert kl_term(np.zeros(20), np.full(20, -0.1)) > 0.0


def test_reparameterized_variance():
    eps = np.random.default_rng(1).standard_normal(100_000)
    z = reparameterize(0.3, -0.7, eps)
    assert np.var(z) == pytest.approx(np.exp(-0.7), rel=0.02)
    assert np.mean(z) == pytest.approx(0.3, abs=0.01)


def test_decode_clamps_log_variance():
    vae = random_vae()
    _, logvar = decode(vae, np.full(CONDITION_SIZE, 50.0), np.full(20, 50.0))
    assert logvar.min() >= -10.0 and logvar.max() <= 3.0


def test_sample_y_is_deterministic_given_latents():
    vae = random_vae()
    v = np.linspace(0.0, 1.0, CONDITION_SIZE)
    z_nlos = np.random.default_rng(2).standard_normal(20)
    z_out = np.random.default_rng(3).standard_normal(ENCODED_SIZE)
    np.testing.assert_array_equal(sample_y(vae, v, z_nlos, z_out), sample_y(vae, v, z_nlos, z_out))
    mu, _ = decode(vae, v, z_nlos)
    np.testing.assert_allclose(sample_y(vae, v, z_nlos, np.zeros(ENCODED_SIZE)), mu)


def test_elbo_gradients_match_finite_differences():
    vae = random_vae(seed=4)
    rng = np.random.default_rng(5)
    v = rng.uniform(size=(3, CONDITION_SIZE))
    y = rng.uniform(-0.5, 1.0, size=(3, ENCODED_SIZE))
    eps = rng.standard_normal((3, vae.latent_dim))
    loss, enc_grads, dec_grads = elbo_gradients(vae, v, y, eps)
    assert loss == pytest.approx(elbo_loss(vae, v, y, eps), rel=1e-12)

    step = 1e-5
    for net_name, grads in (("encoder", enc_grads), ("decoder", dec_grads)):
        net = getattr(vae, net_name)
        params = [p.copy() for p in net.params()]
        analytic = grads.params()

        def loss_at(ps):
            changed = replace(vae, **{net_name: net.with_params(ps)})
            return elbo_loss(changed, v, y, eps)

        for _ in range(20):
            index = int(rng.integers(len(params)))
            coord = tuple(int(rng.integers(n)) for n in params[index].shape)
            original = params[index][coord]
            params[index][coord] = original + step
            up = loss_at(params)
            params[index][coord] = original - step
            down = loss_at(params)
            params[index][coord] = original
            numeric = (up - down) / (2 * step)
            a = analytic[index][coord]
            assert abs(a - numeric) <= 1e-4 * max(abs(a), abs(numeric), 1e-2)


def test_encode_shapes():
    vae = random_vae()
    mu, logvar = encode(vae, np.zeros((4, CONDITION_SIZE)), np.zeros((4, ENCODED_SIZE)))
    assert mu.shape == (4, 20) and logvar.shape == (4, 20)


def test_training_targets_skip_nolink(small_city):
    codec = fit_codec_scalers(small_city)
    cond, y = training_targets(small_city, codec)
    assert len(cond) == int(np.sum(small_city.states != LinkState.NO_LINK))
    assert y.shape == (len(cond), ENCODED_SIZE)


def test_short_training_reduces_loss(small_split):
    train, _ = small_split
    codec = fit_codec_scalers(train)
    vae = train_vae(train, codec, VaeConfig(epochs=6, batch_size=50, learning_rate=1e-3), seed=1)
    assert len(vae.loss_history) == 6
    assert vae.loss_history[-1] < vae.loss_history[0]
    assert vae.scaler.fitted


@pytest.mark.slow
def test_long_training_converges():
    data = generate_city(OracleConfig(), 10_000, seed=2)
    train, _ = split(data, 0.75, seed=2)
    codec = fit_codec_scalers(train)
    vae = train_vae(train, codec, VaeConfig(epochs=500, learning_rate=1e-4), seed=0)
    tail = np.asarray(vae.loss_history[250:])
    blocks = tail.reshape(5, 50).mean(axis=1)
    assert np.all(np.diff(blocks) <= 0.005 * np.abs(blocks[:-1]))


def test_output_noise_averages_to_decoder_mean():
    vae = random_vae(seed=4)
    rng = np.random.default_rng(9)
    v, z = rng.uniform(size=CONDITION_SIZE), rng.standard_normal(vae.latent_dim)
    mu_y, logvar_y = decode(vae, v, z)
    n = 20_000
    samples = sample_y(vae, v, z, rng.standard_normal((n, ENCODED_SIZE)))
    assert samples.shape == (n, ENCODED_SIZE)
    np.testing.assert_array_less(np.abs(samples.mean(axis=0) - mu_y), 5.0 * np.exp(0.5 * logvar_y) / np.sqrt(n))
