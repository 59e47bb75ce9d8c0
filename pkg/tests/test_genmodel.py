from dataclasses import replace

import numpy as np
import pytest

from src.core.domain import GnbType, LinkCondition, LinkRecord, LinkState, derive_link_state, validate_record
from src.core.errors import InvalidConditionError, ModelNotTrainedError, RecordValidationError
from src.core.genmodel import (
    LatentDraw, draw_latent, generate_batch, generate_dataset, generate_link, generate_link_with_state,
    model_summary,
)
from src.core.linkstate import predict_state_probs, sample_state
from src.core.numerics import MinMaxScaler, make_rng
from src.core.pathcodec import ENCODED_SIZE, friis_loss
from src.utils.debug import set_debug


def fixed_draw(z_state, seed=0, latent_dim=20):
    rng = np.random.default_rng(seed)
    return LatentDraw(z_state, rng.standard_normal(latent_dim), rng.standard_normal(ENCODED_SIZE))


def test_draw_latent_shapes():
    draw = draw_latent(make_rng(0, 1), 20)
    assert 0.0 <= draw.z_state < 1.0
    assert draw.z_nlos.shape == (20,)
    assert draw.z_out.shape == (ENCODED_SIZE,)


def test_generated_links_satisfy_record_invariants(small_model):
    conditions = [LinkCondition(float(x), float(y), 60.0, t)
                  for x, y, t in [(100, 0, GnbType.STANDARD), (-300, 250, GnbType.DEDICATED), (20, 5, GnbType.STANDARD)]]
    for paths in generate_batch(small_model, conditions * 10, seed=4):
        report = validate_record(LinkRecord("gen", conditions[0], paths))
        assert report['valid'], report['findings']


def test_state_follows_z_state(small_model):
    u = LinkCondition(150.0, 40.0, 60.0, GnbType.DEDICATED)
    state, paths = generate_link_with_state(small_model, u, fixed_draw(0.0))
    assert state == LinkState.LOS
    assert paths.entries[0].is_los
    assert paths.entries[0].loss_db == pytest.approx(friis_loss(u.d3d_m, small_model.carrier_hz))
    state, paths = generate_link_with_state(small_model, u, fixed_draw(1.0))
    assert state == LinkState.NO_LINK
    assert len(paths) == 0


def test_nlos_draw_has_no_los_entry(small_model):
    u = LinkCondition(150.0, 40.0, 60.0, GnbType.STANDARD)
    p = predict_state_probs(small_model.link_state, u)
    state, paths = generate_link_with_state(small_model, u, fixed_draw(p[0] + 0.5 * p[1]))
    assert state == LinkState.NLOS
    assert not paths.has_los


def test_generation_is_deterministic(small_model):
    conditions = [LinkCondition(50.0 * k, 10.0, 40.0) for k in range(1, 6)]
    a = generate_batch(small_model, conditions, seed=8)
    b = generate_batch(small_model, conditions, seed=8)
    assert a == b
    u = conditions[0]
    assert generate_link(small_model, u, fixed_draw(0.4)) == generate_link(small_model, u, fixed_draw(0.4))


def test_stream_key_changes_draws(small_model):
    conditions = [LinkCondition(80.0, 0.0, 30.0)] * 20
    a = generate_batch(small_model, conditions, seed=8)
    b = generate_batch(small_model, conditions, seed=8, stream_key=(1,))
    assert a != b


def test_zero_displacement_rejected(small_model):
    with pytest.raises(InvalidConditionError):
        generate_link(small_model, LinkCondition(0.0, 0.0, 0.0), fixed_draw(0.5))


def test_untrained_model_rejected(small_model):
    broken = replace(small_model, link_state=replace(small_model.link_state, scaler=MinMaxScaler()))
    with pytest.raises(ModelNotTrainedError):
        generate_link(broken, LinkCondition(10.0, 0.0, 10.0), fixed_draw(0.5))


def test_debug_mode_validates_generated_links(small_model):
    set_debug(True)
    paths = generate_link(small_model, LinkCondition(200.0, 0.0, 88.0), fixed_draw(0.0))
    assert paths.entries[0].is_los


def test_debug_mode_raises_on_invalid_generation(small_model):
    set_debug(True)
    decoder = small_model.vae.decoder
    out_bias = decoder.biases[-1].copy()
    out_bias[0:ENCODED_SIZE:6] += 50.0
    strong = replace(decoder, biases=decoder.biases[:-1] + (out_bias,))
    shifted = replace(small_model, vae=replace(small_model.vae, decoder=strong),
                      codec=replace(small_model.codec, angle_scale_deg=float('nan')))
    with pytest.raises(RecordValidationError) as info:
        generate_link(shifted, LinkCondition(200.0, 0.0, 88.0), fixed_draw(0.0, seed=3))
    assert info.value.findings


def test_generate_dataset_labels_environment(small_model):
    conditions = [LinkCondition(100.0, 0.0, 58.0, GnbType.STANDARD)] * 3
    data = generate_dataset(small_model, conditions, seed=1, env_id="synthetic")
    assert data.env_id == "synthetic"
    assert data.carrier_hz == small_model.carrier_hz
    assert len(data) == 3


def test_model_summary(small_model):
    summary = {s['name']: s for s in model_summary(small_model)}
    assert summary['link_state']['layer_sizes'] == [5, 25, 10, 3]
    assert summary['link_state']['parameters'] == 443
    assert summary['vae_encoder']['layer_sizes'] == [125, 200, 80, 40]
    assert summary['vae_decoder']['layer_sizes'] == [25, 80, 200, 240]


def test_generated_state_frequencies_follow_classifier(small_model):
    u = LinkCondition(150.0, 40.0, 60.0, GnbType.DEDICATED)
    n, seed = 10_000, 23
    probs = predict_state_probs(small_model.link_state, u)
    derived = np.array([derive_link_state(p) for p in generate_batch(small_model, [u] * n, seed)])
    sampled = np.array([sample_state(probs, draw_latent(make_rng(seed, i)).z_state) for i in range(n)])

    for state in LinkState:
        assert np.mean(sampled == state) == pytest.approx(probs[state], abs=0.02)
    np.testing.assert_array_equal(derived == LinkState.LOS, sampled == LinkState.LOS)
    # an NLOS draw whose paths all fall below the floor comes out empty
    mismatch = derived != sampled
    assert np.all((sampled[mismatch] == LinkState.NLOS) & (derived[mismatch] == LinkState.NO_LINK))
