"""
Run Configuration - Pydantic schema for run configuration documents (JSON or YAML)
"""

import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.core.errors import ConfigError

logger = logging.getLogger(__name__)

SUPPORTED_EXTENSIONS = {'.json', '.yaml', '.yml'}


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DataConfig(StrictModel):
    env_id: str = "oracle-city"
    n_links: int = Field(20000, gt=0)
    carrier_hz: float = Field(28e9, gt=0)
    split_fraction: float = Field(0.75, gt=0, lt=1)
    standard_only: bool = False


class PathLossLaw(StrictModel):
    """Loss = intercept + 10 * exponent * log10(d3D) + N(0, shadow_db)"""
    intercept_db: float
    exponent: float = Field(gt=0)
    shadow_db: float = Field(ge=0)


class AngularSpreadLaw(StrictModel):
    """Laplacian scale max_deg at zero distance decaying towards min_deg"""
    max_deg: float = Field(gt=0)
    min_deg: float = Field(gt=0)
    decay_m: float = Field(gt=0)


class OracleConfig(StrictModel):
    area_m: float = Field(1000.0, gt=0)
    dedicated_fraction: float = Field(0.5, ge=0, le=1)
    uav_altitudes_m: List[float] = [30.0, 60.0, 90.0, 120.0]
    standard_height_m: float = Field(2.0, gt=0)
    dedicated_height_m: float = Field(30.0, gt=0)
    standard_alpha: List[float] = [18.0, 36.0, 150.0, -150.0, 60.0, 0.0]
    dedicated_alpha: List[float] = [18.0, 36.0, 294.05, -300.0, 233.98, -0.95]
    nolink_range_m: float = Field(800.0, gt=0)
    nolink_prob: float = Field(0.5, ge=0, le=1)
    los_link_nlos_paths: PathLossLaw = PathLossLaw(intercept_db=70.0, exponent=2.2, shadow_db=4.0)
    nlos_link_paths: PathLossLaw = PathLossLaw(intercept_db=66.0, exponent=2.8, shadow_db=6.0)
    path_excess_db: float = Field(6.0, gt=0)
    los_link_mean_paths: float = Field(4.0, gt=0)
    nlos_link_mean_paths: float = Field(5.0, gt=0)
    aoa_spread: AngularSpreadLaw = AngularSpreadLaw(max_deg=40.0, min_deg=4.0, decay_m=250.0)
    aod_spread: AngularSpreadLaw = AngularSpreadLaw(max_deg=25.0, min_deg=2.0, decay_m=250.0)
    excess_delay_mean_ns: float = Field(120.0, gt=0)

    @field_validator('uav_altitudes_m')
    @classmethod
    def _altitudes_positive(cls, v: List[float]) -> List[float]:
        if not v or any(h <= 0 for h in v):
            raise ValueError("uav_altitudes_m must be a nonempty list of positive heights")
        return v

    @field_validator('standard_alpha', 'dedicated_alpha')
    @classmethod
    def _six_alphas(cls, v: List[float]) -> List[float]:
        if len(v) != 6:
            raise ValueError("P_LOS alpha vectors have exactly 6 entries")
        return v


class TrainConfig(StrictModel):
    epochs: int = Field(gt=0)
    batch_size: int = Field(gt=0)
    learning_rate: float = Field(gt=0)


class LinkStateConfig(TrainConfig):
    epochs: int = Field(50, gt=0)
    batch_size: int = Field(100, gt=0)
    learning_rate: float = Field(1e-3, gt=0)


class VaeConfig(TrainConfig):
    epochs: int = Field(10000, gt=0)
    batch_size: int = Field(100, gt=0)
    learning_rate: float = Field(1e-4, gt=0)
    latent_dim: int = Field(20, gt=0)
    absent_eps: float = Field(0.01, ge=0, lt=1)


class GppConfig(TrainConfig):
    epochs: int = Field(50, gt=0)
    batch_size: int = Field(128, gt=0)
    learning_rate: float = Field(1e-3, gt=0)
    clamp_low: float = Field(0.01, gt=0)
    clamp_high: float = Field(10.0, gt=0)


class GridConfig(StrictModel):
    d2d_bin_m: float = Field(20.0, gt=0)
    dz_bin_m: float = Field(5.0, gt=0)


class EvalConfig(StrictModel):
    angle_threshold_db: float = Field(30.0, ge=0)
    omni_mode: Literal["power_sum", "strongest"] = "power_sum"
    plos_bin_width_m: float = Field(20.0, gt=0)
    angle_distance_edges_m: List[float] = [0.0, 150.0, 300.0, 600.0, 1500.0]
    angle_bins: int = Field(36, gt=0)


class BudgetConfig(StrictModel):
    carrier_hz: float = Field(28e9, gt=0)
    bandwidth_hz: float = Field(400e6, gt=0)
    tx_power_dbm: float = 23.0
    losses_db: float = 6.0
    noise_psd_dbm_hz: float = -174.0


class SnrMapConfig(StrictModel):
    gnb_type: Literal["standard", "dedicated"] = "dedicated"
    x_min_m: float = 0.0
    x_max_m: float = 500.0
    x_steps: int = Field(26, gt=0)
    z_min_m: float = 0.0
    z_max_m: float = 130.0
    z_steps: int = Field(14, gt=0)
    n_real: int = Field(100, gt=0)
    floor_db: float = -40.0


class RunConfig(StrictModel):
    seed: int = 0
    data: DataConfig = DataConfig()
    oracle: OracleConfig = OracleConfig()
    link_state: LinkStateConfig = LinkStateConfig()
    vae: VaeConfig = VaeConfig()
    gpp: GppConfig = GppConfig()
    grid: GridConfig = GridConfig()
    eval: EvalConfig = EvalConfig()
    budget: BudgetConfig = BudgetConfig()
    snr_map: SnrMapConfig = SnrMapConfig()
    show_progress: bool = False


def load_run_config(path: Optional[Union[str, Path]]) -> RunConfig:
    """Load and validate a run configuration; None gives all defaults"""
    if path is None:
        return RunConfig()
    file_path = Path(path)

    if not file_path.exists():
        raise ConfigError(f"Config file not found: {file_path}")
    if file_path.suffix.lower() not in SUPPORTED_EXTENSIONS:
        raise ConfigError(f"Unsupported config format: {file_path.suffix}")

    try:
        with open(file_path, 'r', encoding='utf-8') as f:
            if file_path.suffix.lower() == '.json':
                data = json.load(f)
            else:
                data = yaml.safe_load(f)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"Failed to parse {file_path.name}: {e}")

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config {file_path.name} must be a mapping at top level")

    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"Invalid config {file_path.name}: {problems}")

    logger.info(f"Run config loaded: {file_path}")
    return config
