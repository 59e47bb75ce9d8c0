"""
Run Files - Run directories, manifests and CSV exports
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd

from config import settings
from src import __version__
from src.core.errors import ConfigError
from src.types import RunManifest
from src.utils.run_config import RunConfig

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
CONFIG_FILE = "config.json"
EXPORT_FLOAT_FORMAT = "%.10g"


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def prepare_run_dir(out: Optional[Union[str, Path]], command: str) -> Path:
    """Use the requested output directory, or <runs_dir>/<command> by default"""
    run_dir = Path(out) if out else Path(settings.runs_dir) / command
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def write_effective_config(cfg: RunConfig, run_dir: Path) -> Path:
    path = run_dir / CONFIG_FILE
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(cfg.model_dump(mode='json'), f, indent=2)
    return path


def write_frame(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=EXPORT_FLOAT_FORMAT, lineterminator='\n')
    return path


def loss_curve_frame(histories: Dict[str, List[float]]) -> pd.DataFrame:
    """Long-format (network, epoch, loss) rows"""
    rows = [{'network': name, 'epoch': epoch + 1, 'loss': loss}
            for name, history in histories.items() for epoch, loss in enumerate(history)]
    return pd.DataFrame(rows, columns=['network', 'epoch', 'loss'])


def build_manifest(command: str, args: Dict[str, Any], cfg: RunConfig, inputs: Dict[str, str],
                   outputs: List[Path], run_dir: Path,
                   summary: Optional[Dict[str, Any]] = None) -> RunManifest:
    """Inputs are hashed so a rerun can detect changed files; no timestamps are recorded"""
    return {
        'command': command,
        'args': args,
        'seed': cfg.seed,
        'inputs': {str(p): file_sha256(p) for p in inputs.values() if p},
        'config': cfg.model_dump(mode='json'),
        'outputs': sorted(str(Path(p).relative_to(run_dir)) for p in outputs),
        'summary': summary or {},
        'version': __version__,
    }


def write_manifest(manifest: RunManifest, run_dir: Path) -> Path:
    path = run_dir / MANIFEST_FILE
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return path


def load_manifest(path: Union[str, Path]) -> RunManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILE
    if not path.exists():
        raise FileNotFoundError(f"Manifest not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            manifest = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path.name} is not valid JSON ({e})")
    missing = [k for k in ('command', 'args', 'config', 'inputs') if k not in manifest]
    if missing:
        raise ConfigError(f"Manifest {path} is missing: {', '.join(missing)}")
    return manifest


def check_inputs_unchanged(manifest: RunManifest) -> None:
    for path, digest in manifest['inputs'].items():
        if not Path(path).exists():
            raise ConfigError(f"Manifest input no longer exists: {path}")
        if file_sha256(path) != digest:
            raise ConfigError(f"Manifest input changed since the run: {path}")
