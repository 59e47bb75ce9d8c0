import argparse
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, List, Optional

from config import settings
from src.core.commands import COMMAND_HANDLERS, execute_command
from src.utils.debug import set_debug

# Setup logging
log_dir = Path(settings.log_dir)
log_dir.mkdir(parents=True, exist_ok=True)

handlers = [logging.StreamHandler()]

# Add rotating file handler
file_handler = RotatingFileHandler(
    log_dir / "app.log",
    maxBytes=1 * 1024 * 1024,  # 1MB per file
    backupCount=5  # Keep 5 files (5MB total)
)
handlers.append(file_handler)

logging.basicConfig(
    level=getattr(logging, settings.log_level.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=handlers
)

logger = logging.getLogger(__name__)

COMMAND_HELP = {
    'datagen': "generate an oracle city dataset",
    'train': "train the link-state classifier and path VAE",
    'generate': "sample path sets for a condition file",
    'fit-3gpp': "refit the 3GPP LOS probability and/or path loss",
    'eval': "benchmark the generative model and 3GPP baselines on a dataset",
    'snr-map': "median SNR map above one gNB",
    'validate': "check every record of a dataset file",
    'rerun': "repeat a run from its manifest",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uav-channel", description="UAV mmWave generative channel model")
    sub = parser.add_subparsers(dest='command', required=True)
    for name in COMMAND_HANDLERS:
        cmd = sub.add_parser(name, help=COMMAND_HELP.get(name, ""))
        cmd.add_argument('--config', help="run configuration (.json, .yaml or .yml)")
        cmd.add_argument('--seed', type=int, help="override the configured seed")
        cmd.add_argument('--out', help="run directory for all outputs")
        cmd.add_argument('--debug', action='store_true', help="validate every generated link")
        if name in ('train', 'fit-3gpp', 'eval', 'validate'):
            cmd.add_argument('--data', required=True, help="dataset CSV")
        if name in ('generate', 'snr-map'):
            cmd.add_argument('--model', required=True, help="model JSON")
        if name == 'eval':
            cmd.add_argument('--model', help="model JSON (optional: baselines only without it)")
            cmd.add_argument('--params', nargs='*', default=[], help="refitted 3GPP parameter files")
        if name == 'generate':
            cmd.add_argument('--conditions', required=True, help="condition CSV (dx_m, dy_m, dz_m, gnb_type)")
        if name == 'fit-3gpp':
            cmd.add_argument('--which', choices=['plos', 'pathloss', 'both'], default='both')
        if name == 'rerun':
            cmd.add_argument('--manifest', required=True, help="manifest.json or its run directory")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop('command')
    if args.pop('debug'):
        set_debug(True)
    command_args: Dict[str, Any] = args
    logger.info(f"Running command '{command}'")
    result = execute_command(command, command_args)
    if not result['success']:
        logger.error(result['error'])
        return 1
    for path in result['outputs']:
        logger.info(f"Wrote {path}")
    return 0


if __name__ == "__main__":
    try:
        sys.exit(main())
    except Exception:
        logger.exception("Application crashed with unhandled exception")
        raise
