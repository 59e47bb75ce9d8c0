from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from src.core.airsim import (
    ArrayConfig, LinkBudget, beamforming_gain, element_gain, gnb_arrays, link_snr, snr_map, uav_array,
)
from src.core.domain import GnbType, PathEntry, PathSet, direction_from_angles
from src.core.pathcodec import los_geometry
from src.utils.run_config import BudgetConfig, SnrMapConfig

BORESIGHT = np.array([1.0, 0.0, 0.0])


def test_noise_power():
    assert LinkBudget().noise_dbm == pytest.approx(-81.98, abs=0.01)
    assert LinkBudget.from_config(BudgetConfig(bandwidth_hz=100e6)).noise_dbm == pytest.approx(-88.0, abs=0.01)


def test_budget_rejects_nonpositive_bandwidth():
    with pytest.raises(ValueError):
        LinkBudget(bandwidth_hz=0.0)


def test_element_pattern():
    cfg = ArrayConfig(rows=1, cols=1)
    assert element_gain(cfg, BORESIGHT) == pytest.approx(0.0)
    half = direction_from_angles(cfg.hpbw_az_deg / 2.0, 90.0)
    assert element_gain(cfg, half) == pytest.approx(-3.0)
    assert element_gain(cfg, -BORESIGHT) == pytest.approx(-cfg.front_to_back_db)


def test_boresight_array_gain():
    cfg = ArrayConfig(rows=8, cols=8)
    assert beamforming_gain(cfg, BORESIGHT, BORESIGHT) == pytest.approx(10.0 * np.log10(64.0))


def test_array_null():
    cfg = ArrayConfig(rows=1, cols=8)
    path = np.array([np.sqrt(1.0 - 0.25 ** 2), 0.25, 0.0])
    assert beamforming_gain(cfg, BORESIGHT, path) < -100.0


def test_steering_off_boresight_keeps_array_factor():
    cfg = ArrayConfig(rows=4, cols=4)
    steer = direction_from_angles(20.0, 80.0)
    gain = beamforming_gain(cfg, steer, steer)
    assert gain == pytest.approx(10.0 * np.log10(16.0) + element_gain(cfg, steer))


def test_default_arrays():
    assert uav_array().n_elements == 16
    assert len(gnb_arrays(GnbType.STANDARD)) == 3
    (rooftop,) = gnb_arrays(GnbType.DEDICATED)
    assert rooftop.boresight_el_deg == 0.0


def test_vertical_los_link_snr():
    entry = los_geometry([0.0, 0.0, 100.0], 28e9).as_entry()
    snr = link_snr(PathSet.from_present([entry]), LinkBudget(), uav_array(), gnb_arrays(GnbType.DEDICATED))
    assert snr == pytest.approx(33.69, abs=0.05)


def test_weaker_path_never_lowers_snr():
    los = los_geometry([60.0, 20.0, 80.0], 28e9).as_entry()
    weak = PathEntry(los.loss_db + 12.0, 40.0, 70.0, -100.0, 150.0, los.delay_s + 2e-7)
    args = (LinkBudget(), uav_array(), gnb_arrays(GnbType.DEDICATED))
    single = link_snr(PathSet.from_present([los]), *args)
    both = link_snr(PathSet.from_present([los, weak]), *args)
    assert both >= single
    assert link_snr(PathSet.from_present([weak, replace(los, is_los=False)]), *args) == pytest.approx(both)


def test_empty_link_has_no_snr():
    assert link_snr(PathSet.empty(), LinkBudget(), uav_array(), gnb_arrays(GnbType.DEDICATED)) == float('-inf')


def test_snr_map_grid(small_model):
    cfg = SnrMapConfig(x_min_m=0.0, x_max_m=100.0, x_steps=2, z_min_m=30.0, z_max_m=90.0, z_steps=2, n_real=3)
    table = snr_map(small_model, cfg, LinkBudget(), seed=5, gnb_type=GnbType.DEDICATED)
    assert list(table.columns) == ['x', 'z', 'median_snr_db']
    assert len(table) == 4
    at_gnb = table[(table['x'] == 0.0) & (table['z'] == 30.0)]
    assert at_gnb['median_snr_db'].isna().all()
    others = table.drop(at_gnb.index)['median_snr_db']
    assert np.all(np.isfinite(others))
    assert np.all(others >= cfg.floor_db)
    pd.testing.assert_frame_equal(table, snr_map(small_model, cfg, LinkBudget(), seed=5, gnb_type=GnbType.DEDICATED))
