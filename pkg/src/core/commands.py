"""
Commands - Registry-based command execution for reproducible runs

Every handler takes the parsed arguments and the effective run configuration,
writes its outputs into one run directory together with config.json and
manifest.json, and returns a CommandResult.
"""

import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.core.airsim import LinkBudget, snr_map
from src.core.citygen import generate_city, split
from src.core.domain import Dataset, GnbType, LinkRecord, LinkState, filter_by_type
from src.core.errors import ChannelModelError, ConfigError, InvalidConditionError
from src.core.genmodel import GenerativeModel, generate_batch, generate_dataset, model_summary, train_generative_model
from src.core.gpp_baseline import (
    H_MAX_M, H_MIN_M, Alpha3GPP, Beta3GPP, condition_matrix, dataset_conditions, fit_pathloss, fit_plos,
    plos_3gpp_array, sample_pathloss_3gpp,
)
from src.core.linkstate import empirical_plos_curve, predict_state_probs_batch
from src.core.metrics import (
    GridSpec, PlosFunction, angular_distribution, angular_iqr_table, angular_table, export_cdf,
    omni_pathloss_array, plos_grid_table, wasserstein1,
)
from src.core.numerics import make_rng
from src.types import CommandResult, EvalMetric
from src.utils.dataset_files import parse_dataset, read_conditions, read_dataset, write_dataset
from src.utils.model_files import load_model, load_params, save_model, save_params
from src.utils.run_config import RunConfig, load_run_config
from src.utils.run_files import (
    build_manifest, check_inputs_unchanged, load_manifest, loss_curve_frame, prepare_run_dir,
    write_effective_config, write_frame, write_manifest,
)

logger = logging.getLogger(__name__)

EVAL_STREAM = 6
TYPE_LABELS = ('all', GnbType.STANDARD.value, GnbType.DEDICATED.value)

CommandHandler = Callable[[Dict[str, Any], RunConfig], CommandResult]


def _require(args: Dict[str, Any], key: str, command: str) -> Any:
    value = args.get(key)
    if not value:
        raise ConfigError(f"--{key.replace('_', '-')} is required for {command}")
    return value


def _finish(command: str, args: Dict[str, Any], cfg: RunConfig, run_dir: Path, inputs: Dict[str, str],
            outputs: List[Path], summary: Optional[Dict[str, Any]] = None) -> CommandResult:
    outputs = list(outputs) + [write_effective_config(cfg, run_dir)]
    manifest = build_manifest(command, args, cfg, inputs, outputs, run_dir, summary)
    outputs.append(write_manifest(manifest, run_dir))
    logger.info(f"Command '{command}' completed: {len(outputs)} files in {run_dir}")
    return {'success': True, 'error': None, 'outputs': [str(p) for p in outputs]}


def _partition(data: Dataset, cfg: RunConfig) -> Tuple[Dataset, Dataset]:
    """The run's train/test split of the full, unfiltered dataset"""
    return split(data, cfg.data.split_fraction, cfg.seed)


def _restrict(data: Dataset, cfg: RunConfig) -> Dataset:
    return filter_by_type(data, GnbType.STANDARD) if cfg.data.standard_only else data


def _same_carrier(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-9)


def generative_plos_function(model: GenerativeModel) -> PlosFunction:
    """P_LOS of the link-state predictor at (d2D, dz) bin centers"""
    def probs(d2d, dz, dedicated):
        d = np.column_stack([np.asarray(d2d, dtype=float), np.zeros(len(d2d)), np.asarray(dz, dtype=float)])
        return predict_state_probs_batch(model.link_state, d, dedicated)[:, int(LinkState.LOS)]
    return probs


def gpp_plos_function(alpha: Alpha3GPP, standard_height_m: float = 2.0,
                      dedicated_height_m: float = 30.0) -> PlosFunction:
    """3GPP P_LOS at (d2D, dz) bin centers with the UAV height clipped to the validity range"""
    def probs(d2d, dz, dedicated):
        h_gnb = np.where(np.asarray(dedicated, dtype=bool), dedicated_height_m, standard_height_m)
        h = np.clip(np.asarray(dz, dtype=float) + h_gnb, H_MIN_M, H_MAX_M)
        return plos_3gpp_array(condition_matrix(h, d2d, h_gnb), alpha.values)
    return probs


def _type_masks(dedicated: np.ndarray) -> Dict[str, np.ndarray]:
    return {'all': np.ones(len(dedicated), dtype=bool),
            GnbType.STANDARD.value: ~dedicated,
            GnbType.DEDICATED.value: dedicated.copy()}


def _finite_by_type(values: np.ndarray, dedicated: np.ndarray) -> Dict[str, np.ndarray]:
    return {label: values[mask & np.isfinite(values)] for label, mask in _type_masks(dedicated).items()}


def handle_datagen(args: Dict[str, Any], cfg: RunConfig) -> CommandResult:
    """Generate an oracle city dataset"""
    run_dir = prepare_run_dir(args.get('out'), 'datagen')
    data = generate_city(cfg.oracle, cfg.data.n_links, cfg.seed, cfg.data.env_id, cfg.data.carrier_hz,
                         cfg.show_progress)
    path = write_dataset(data, run_dir / "dataset.csv")
    counts = np.bincount(data.states, minlength=3)
    summary = {'n_links': len(data), 'states': {s.name: int(counts[s]) for s in LinkState}}
    return _finish('datagen', args, cfg, run_dir, {}, [path, path.with_name("dataset.meta.json")], summary)


def handle_train(args: Dict[str, Any], cfg: RunConfig) -> CommandResult:
    """Fit scalers, train the link-state classifier and the path VAE on the training split"""
    data_path = _require(args, 'data', 'train')
    run_dir = prepare_run_dir(args.get('out'), 'train')
    train, test = _partition(read_dataset(data_path), cfg)
    model = train_generative_model(train, cfg.link_state, cfg.vae, cfg.seed, cfg.show_progress)

    model_path = save_model(model, run_dir / "model.json")
    losses_path = write_frame(loss_curve_frame({
        'link_state': list(model.link_state.loss_history),
        'vae': list(model.vae.loss_history),
    }), run_dir / "losses.csv")
    summary = {
        'n_train': len(train),
        'n_test': len(test),
        'networks': model_summary(model),
        'final_link_state_loss': model.link_state.loss_history[-1],
        'final_vae_loss': model.vae.loss_history[-1],
    }
    return _finish('train', args, cfg, run_dir, {'data': data_path}, [model_path, losses_path], summary)


def handle_generate(args: Dict[str, Any], cfg: RunConfig) -> CommandResult:
    """Sample one path set per row of a condition file"""
    model_path = _require(args, 'model', 'generate')
    conditions_path = _require(args, 'conditions', 'generate')
    run_dir = prepare_run_dir(args.get('out'), 'generate')
    model = load_model(model_path)
    conditions = read_conditions(conditions_path)
    generated = generate_dataset(model, conditions, cfg.seed)
    path = write_dataset(generated, run_dir / "generated.csv")
    return _finish('generate', args, cfg, run_dir, {'model': model_path, 'conditions': conditions_path},
                   [path, path.with_name("generated.meta.json")], {'n_links': len(generated)})


def handle_fit_3gpp(args: Dict[str, Any], cfg: RunConfig) -> CommandResult:
    """Refit the 3GPP LOS probability and/or path loss on the training split"""
    data_path = _require(args, 'data', 'fit-3gpp')
    which = args.get('which') or 'both'
    if which not in ('plos', 'pathloss', 'both'):
        raise ConfigError(f"Unknown 3GPP fit target: {which}")
    run_dir = prepare_run_dir(args.get('out'), 'fit-3gpp')
    train, _ = _partition(read_dataset(data_path), cfg)
    train = _restrict(train, cfg)
    heights = dict(standard_height_m=cfg.oracle.standard_height_m, dedicated_height_m=cfg.oracle.dedicated_height_m)

    outputs, summary = [], {}
    if which in ('plos', 'both'):
        alpha = fit_plos(train, cfg.gpp, cfg.seed, show_progress=cfg.show_progress, **heights)
        outputs.append(save_params(alpha, run_dir / "plos_params.json"))
        summary['plos_multipliers'] = list(alpha.multipliers)
    if which in ('pathloss', 'both'):
        beta = fit_pathloss(train, cfg.gpp, cfg.seed, omni_mode=cfg.eval.omni_mode,
                            show_progress=cfg.show_progress, **heights)
        outputs.append(save_params(beta, run_dir / "pathloss_params.json"))
        summary['pathloss_multipliers'] = list(beta.multipliers)
    return _finish('fit-3gpp', args, cfg, run_dir, {'data': data_path}, outputs, summary)


def _load_fitted(paths: List[str]) -> Tuple[Optional[Alpha3GPP], Optional[Beta3GPP]]:
    alpha, beta = None, None
    for path in paths:
        params = load_params(path)
        if isinstance(params, Alpha3GPP):
            alpha = params
        else:
            beta = params
    return alpha, beta


def _evaluation_set(data: Dataset, model: Optional[GenerativeModel], cfg: RunConfig,
                    refitted: bool = False) -> Tuple[Dataset, str]:
    """
    Held-out split for a model of the same environment, the whole dataset otherwise

    The split is always taken on the unfiltered dataset so train, fit-3gpp
    and eval share one partition. Refitted 3GPP parameters come from the
    training split, so their presence also forces the held-out split.
    """
    pairing = 'baseline' if model is None else ('intra' if model.env_id == data.env_id else 'inter')
    if pairing == 'inter' and not refitted:
        return _restrict(data, cfg), pairing
    _, test = _partition(data, cfg)
    return _restrict(test, cfg), pairing


def _generated_dataset(model: GenerativeModel, test: Dataset, seed: int) -> Dataset:
    conditions = [r.condition for r in test.records]
    paths = generate_batch(model, conditions, seed, stream_key=(EVAL_STREAM,))
    return Dataset(tuple(LinkRecord(model.env_id, u, p) for u, p in zip(conditions, paths)),
                   carrier_hz=model.carrier_hz)


def _gpp_pathloss_samples(test: Dataset, alpha: Alpha3GPP, beta: Beta3GPP, cfg: RunConfig) -> np.ndarray:
    """One 3GPP path-loss draw per test link that has a link; NaN elsewhere"""
    cond, valid = dataset_conditions(test, cfg.oracle.standard_height_m, cfg.oracle.dedicated_height_m)
    uniforms = make_rng(cfg.seed, EVAL_STREAM, 1).uniform(size=len(test))
    pl, _ = sample_pathloss_3gpp(cond, alpha, beta, test.carrier_hz, uniforms)
    return np.where(valid & (test.states != LinkState.NO_LINK), pl, np.nan)


def handle_eval(args: Dict[str, Any], cfg: RunConfig) -> CommandResult:
    """
    Side-by-side benchmark of the generative model and the 3GPP baselines

    Reports P_LOS grid MAE and Wasserstein-1 of omnidirectional path loss
    overall and per gNB type, exports path-loss CDFs, P_LOS grid tables,
    the empirical P_LOS curve and angular histograms.
    """
    data_path = _require(args, 'data', 'eval')
    model_path = args.get('model')
    param_paths = list(args.get('params') or [])
    run_dir = prepare_run_dir(args.get('out'), 'eval')
    eval_dir = run_dir / "eval"

    data = read_dataset(data_path)
    model = load_model(model_path) if model_path else None
    if model is not None and not _same_carrier(model.carrier_hz, data.carrier_hz):
        raise InvalidConditionError(
            f"Model carrier {model.carrier_hz:.6g} Hz does not match dataset carrier {data.carrier_hz:.6g} Hz")
    fitted_alpha, fitted_beta = _load_fitted(param_paths)
    test, pairing = _evaluation_set(data, model, cfg, refitted=bool(param_paths))
    logger.info(f"Evaluating on {len(test)} links ({pairing})")

    nominal_alpha, nominal_beta = Alpha3GPP.nominal_params(), Beta3GPP.nominal_params()
    heights = (cfg.oracle.standard_height_m, cfg.oracle.dedicated_height_m)

    plos_sources: Dict[str, PlosFunction] = {'3gpp_nominal': gpp_plos_function(nominal_alpha, *heights)}
    pathloss: Dict[str, np.ndarray] = {
        'test': omni_pathloss_array(test.path_arrays, cfg.eval.omni_mode),
        '3gpp_nominal': _gpp_pathloss_samples(test, nominal_alpha, nominal_beta, cfg),
    }
    generated = None
    if model is not None:
        generated = _generated_dataset(model, test, cfg.seed)
        plos_sources['generative'] = generative_plos_function(model)
        pathloss['generative'] = omni_pathloss_array(generated.path_arrays, cfg.eval.omni_mode)
    if fitted_alpha is not None or fitted_beta is not None:
        alpha = fitted_alpha or nominal_alpha
        beta = fitted_beta or nominal_beta
        plos_sources['3gpp_refitted'] = gpp_plos_function(alpha, *heights)
        pathloss['3gpp_refitted'] = _gpp_pathloss_samples(test, alpha, beta, cfg)

    metrics: List[EvalMetric] = []
    outputs: List[Path] = []
    grid = GridSpec(cfg.grid.d2d_bin_m, cfg.grid.dz_bin_m)
    for source, fn in plos_sources.items():
        table = plos_grid_table(fn, test, grid)
        outputs.append(write_frame(table, eval_dir / f"plos_grid_{source}.csv"))
        metrics.append({'metric': 'plos_grid_mae', 'source': source, 'gnb_type': 'all',
                        'value': float(table['abs_error'].mean())})
        for gnb_type, group in table.groupby('gnb_type', sort=True):
            metrics.append({'metric': 'plos_grid_mae', 'source': source, 'gnb_type': gnb_type,
                            'value': float(group['abs_error'].mean())})

    reference = _finite_by_type(pathloss['test'], test.dedicated)
    for source, values in pathloss.items():
        by_type = _finite_by_type(values, test.dedicated)
        for label in TYPE_LABELS:
            if by_type[label].size == 0:
                continue
            outputs.append(export_cdf(by_type[label], eval_dir / f"pathloss_cdf_{source}_{label}.csv"))
            if source != 'test' and reference[label].size:
                metrics.append({'metric': 'pathloss_w1_db', 'source': source, 'gnb_type': label,
                                'value': wasserstein1(reference[label], by_type[label])})

    outputs.append(write_frame(
        empirical_plos_curve(test, cfg.eval.plos_bin_width_m, group_by_altitude=True,
                             standard_height_m=heights[0], dedicated_height_m=heights[1]),
        eval_dir / "plos_curve.csv"))
    angle_sets = {'test': test} if generated is None else {'test': test, 'generative': generated}
    for source, subset in angle_sets.items():
        dist = angular_distribution(subset, cfg.eval.angle_threshold_db, cfg.eval.angle_distance_edges_m,
                                    cfg.eval.angle_bins)
        outputs.append(write_frame(angular_table(dist), eval_dir / f"angular_{source}.csv"))
        outputs.append(write_frame(angular_iqr_table(dist), eval_dir / f"angular_iqr_{source}.csv"))

    outputs.append(write_frame(pd.DataFrame(metrics, columns=['metric', 'source', 'gnb_type', 'value']),
                               eval_dir / "metrics.csv"))
    inputs = {'data': data_path, 'model': model_path}
    inputs.update({f'params_{i}': p for i, p in enumerate(param_paths)})
    summary = {'pairing': pairing, 'n_links': len(test), 'metrics': metrics}
    return _finish('eval', args, cfg, run_dir, inputs, outputs, summary)


def handle_snr_map(args: Dict[str, Any], cfg: RunConfig) -> CommandResult:
    """Median SNR over generated realizations on the configured (x, z) grid"""
    model_path = _require(args, 'model', 'snr-map')
    run_dir = prepare_run_dir(args.get('out'), 'snr-map')
    model = load_model(model_path)
    budget = LinkBudget.from_config(cfg.budget)
    if not _same_carrier(model.carrier_hz, budget.carrier_hz):
        raise InvalidConditionError(
            f"Model carrier {model.carrier_hz:.6g} Hz does not match budget carrier {budget.carrier_hz:.6g} Hz")
    frame = snr_map(model, cfg.snr_map, budget, cfg.seed)
    path = write_frame(frame, run_dir / "snr_map.csv")
    summary = {'noise_dbm': budget.noise_dbm, 'gnb_type': cfg.snr_map.gnb_type}
    return _finish('snr-map', args, cfg, run_dir, {'model': model_path}, [path], summary)


def handle_validate(args: Dict[str, Any], cfg: RunConfig) -> CommandResult:
    """Check every record of a dataset file; fails when any record is invalid"""
    data_path = _require(args, 'data', 'validate')
    run_dir = prepare_run_dir(args.get('out'), 'validate')
    data, findings = parse_dataset(data_path)
    rows = [{'row': row, 'finding': msg} for row, msgs in findings.items() for msg in msgs]
    path = write_frame(pd.DataFrame(rows, columns=['row', 'finding']), run_dir / "findings.csv")
    result = _finish('validate', args, cfg, run_dir, {'data': data_path}, [path],
                     {'n_records': len(data), 'n_invalid': len(findings)})
    if findings:
        result['success'] = False
        result['error'] = f"{len(findings)} of {len(data)} records are invalid (see {path})"
    return result


def handle_rerun(args: Dict[str, Any], cfg: RunConfig) -> CommandResult:
    """Repeat a run from its manifest alone, into a new output directory"""
    manifest = load_manifest(_require(args, 'manifest', 'rerun'))
    out = _require(args, 'out', 'rerun')
    if manifest['command'] == 'rerun':
        raise ConfigError("A rerun manifest cannot be rerun")
    check_inputs_unchanged(manifest)
    try:
        run_cfg = RunConfig.model_validate(manifest['config'])
    except ValueError as e:
        raise ConfigError(f"Manifest configuration is invalid: {e}")
    run_args = dict(manifest['args'])
    run_args['out'] = out
    run_args['seed'] = None
    logger.info(f"Rerunning '{manifest['command']}' from manifest")
    return run_command(manifest['command'], run_args, run_cfg)


COMMAND_HANDLERS: Dict[str, CommandHandler] = {
    'datagen': handle_datagen,
    'train': handle_train,
    'generate': handle_generate,
    'fit-3gpp': handle_fit_3gpp,
    'eval': handle_eval,
    'snr-map': handle_snr_map,
    'validate': handle_validate,
    'rerun': handle_rerun,
}


def get_command_handler(command: str) -> Optional[CommandHandler]:
    """Get handler function for a command name"""
    return COMMAND_HANDLERS.get(command)


def run_command(command: str, args: Dict[str, Any], cfg: RunConfig) -> CommandResult:
    """Dispatch with an already loaded configuration; --seed overrides the configured seed"""
    handler = get_command_handler(command)
    if not handler:
        return {'success': False, 'error': f'Unknown command: {command}', 'outputs': []}
    if args.get('seed') is not None:
        cfg = cfg.model_copy(update={'seed': int(args['seed'])})
    return handler(args, cfg)


def execute_command(command: str, args: Dict[str, Any]) -> CommandResult:
    """
    Load the run configuration and execute a command

    Returns:
        {'success': bool, 'error': str, 'outputs': [paths]}
    """
    try:
        cfg = load_run_config(args.get('config'))
        return run_command(command, args, cfg)
    except (ChannelModelError, OSError) as e:
        logger.error(f"Command '{command}' failed: {e}")
        return {'success': False, 'error': str(e), 'outputs': []}
    except Exception as e:
        logger.exception(f"Command '{command}' crashed")
        return {'success': False, 'error': f'Command execution error: {str(e)}', 'outputs': []}
