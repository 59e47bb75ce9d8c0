import json

import pytest

from src.core.errors import ConfigError
from src.utils.run_config import RunConfig, load_run_config


def test_defaults():
    cfg = load_run_config(None)
    assert cfg == RunConfig()
    assert cfg.data.n_links == 20000
    assert cfg.data.carrier_hz == 28e9
    assert cfg.vae.latent_dim == 20
    assert cfg.eval.omni_mode == "power_sum"
    assert cfg.oracle.uav_altitudes_m == [30.0, 60.0, 90.0, 120.0]


def test_json_partial_override(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"seed": 4, "vae": {"epochs": 10}}), encoding='utf-8')
    cfg = load_run_config(path)
    assert cfg.seed == 4
    assert cfg.vae.epochs == 10
    assert cfg.vae.batch_size == 100


def test_yaml_config(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("data:\n  n_links: 500\n  standard_only: true\nsnr_map:\n  gnb_type: standard\n", encoding='utf-8')
    cfg = load_run_config(path)
    assert cfg.data.n_links == 500
    assert cfg.data.standard_only
    assert cfg.snr_map.gnb_type == "standard"


def test_empty_yaml_gives_defaults(tmp_path):
    path = tmp_path / "empty.yml"
    path.write_text("", encoding='utf-8')
    assert load_run_config(path) == RunConfig()


def test_full_dump_reloads(tmp_path):
    path = tmp_path / "full.json"
    path.write_text(json.dumps(RunConfig(seed=9).model_dump(mode='json')), encoding='utf-8')
    assert load_run_config(path) == RunConfig(seed=9)


@pytest.mark.parametrize("content,match", [
    ({"sed": 1}, "sed"),
    ({"vae": {"latent": 4}}, "vae.latent"),
    ({"data": {"n_links": 0}}, "data.n_links"),
    ({"data": {"split_fraction": 1.0}}, "split_fraction"),
    ({"eval": {"omni_mode": "mean"}}, "omni_mode"),
    ({"oracle": {"standard_alpha": [1.0, 2.0]}}, "standard_alpha"),
    ({"oracle": {"uav_altitudes_m": []}}, "uav_altitudes_m"),
])
def test_invalid_values_rejected(tmp_path, content, match):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(content), encoding='utf-8')
    with pytest.raises(ConfigError, match=match):
        load_run_config(path)


def test_file_problems(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "missing.json")
    toml = tmp_path / "run.toml"
    toml.write_text("seed = 1\n", encoding='utf-8')
    with pytest.raises(ConfigError, match="Unsupported"):
        load_run_config(toml)
    broken = tmp_path / "broken.json"
    broken.write_text("{\"seed\": ", encoding='utf-8')
    with pytest.raises(ConfigError, match="parse"):
        load_run_config(broken)
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n", encoding='utf-8')
    with pytest.raises(ConfigError, match="mapping"):
        load_run_config(listing)
