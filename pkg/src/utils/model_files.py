"""
Model Files - JSON persistence of the generative model and of 3GPP baseline parameters
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from src.core.errors import DimensionMismatchError, ModelFormatError
from src.core.genmodel import MODEL_VERSION, GenerativeModel
from src.core.gpp_baseline import Alpha3GPP, Beta3GPP, GppParams
from src.core.linkstate import LinkStateModel
from src.core.numerics import DenseNet, MinMaxScaler
from src.core.pathcodec import CodecScalers
from src.core.pathvae import VaeModel
from src.types import DenseNetDocument, GppParamsDocument, ScalerDocument

logger = logging.getLogger(__name__)

MODEL_FORMAT = "uav-mmwave-genmodel"
GPP_FORMAT = "uav-mmwave-3gpp"
GPP_VERSION = 1
PATH_LAYOUT = "path-major-6"
GPP_KINDS = {Alpha3GPP.kind: Alpha3GPP, Beta3GPP.kind: Beta3GPP}


def net_to_document(net: DenseNet) -> DenseNetDocument:
    return {
        'layer_sizes': list(net.layer_sizes),
        'hidden_activation': net.hidden_activation,
        'output_activation': net.output_activation,
        'weights': [w.tolist() for w in net.weights],
        'biases': [b.tolist() for b in net.biases],
    }


def net_from_document(doc: DenseNetDocument) -> DenseNet:
    return DenseNet(
        layer_sizes=tuple(int(n) for n in doc['layer_sizes']),
        weights=tuple(np.asarray(w, dtype=float).reshape(len(w), -1) for w in doc['weights']),
        biases=tuple(np.asarray(b, dtype=float) for b in doc['biases']),
        hidden_activation=doc['hidden_activation'],
        output_activation=doc['output_activation'],
    )


def scaler_to_document(scaler: MinMaxScaler) -> ScalerDocument:
    pinned = scaler.pinned if scaler.pinned is not None else np.zeros(scaler.size, dtype=bool)
    return {
        'lower': scaler.lower.tolist(),
        'upper': scaler.upper.tolist(),
        'pinned': [bool(p) for p in pinned],
    }


def scaler_from_document(doc: ScalerDocument) -> MinMaxScaler:
    lower = np.asarray(doc['lower'], dtype=float)
    upper = np.asarray(doc['upper'], dtype=float)
    if lower.shape != upper.shape:
        raise DimensionMismatchError("Scaler lower and upper limits differ in length")
    pinned = np.asarray(doc.get('pinned', [False] * len(lower)), dtype=bool)
    return MinMaxScaler(lower=lower, upper=upper, pinned=pinned)


def model_to_document(model: GenerativeModel) -> Dict[str, Any]:
    return {
        'format': MODEL_FORMAT,
        'version': model.version,
        'layout': PATH_LAYOUT,
        'env_id': model.env_id,
        'carrier_hz': model.carrier_hz,
        'latent_dim': model.vae.latent_dim,
        'absent_eps': model.absent_eps,
        'networks': {
            'link_state': net_to_document(model.link_state.classifier),
            'vae_encoder': net_to_document(model.vae.encoder),
            'vae_decoder': net_to_document(model.vae.decoder),
        },
        'scalers': {
            'link_state_condition': scaler_to_document(model.link_state.scaler),
            'path_condition': scaler_to_document(model.vae.scaler),
            'excess_gain': scaler_to_document(model.codec.gain),
            'excess_delay': scaler_to_document(model.codec.delay),
        },
        'angle_scale_deg': model.codec.angle_scale_deg,
        'loss_history': {
            'link_state': list(model.link_state.loss_history),
            'vae': list(model.vae.loss_history),
        },
    }


def model_from_document(doc: Dict[str, Any]) -> GenerativeModel:
    if not isinstance(doc, dict) or doc.get('format') != MODEL_FORMAT:
        raise ModelFormatError(f"Not a generative model file (format {doc.get('format') if isinstance(doc, dict) else None!r})")
    if doc.get('version') != MODEL_VERSION:
        raise ModelFormatError(f"Unsupported model version {doc.get('version')!r} (expected {MODEL_VERSION})")
    if doc.get('layout') != PATH_LAYOUT:
        raise ModelFormatError(f"Unsupported path layout {doc.get('layout')!r}")
    try:
        nets = doc['networks']
        scalers = doc['scalers']
        history = doc.get('loss_history', {})
        link_state = LinkStateModel(
            classifier=net_from_document(nets['link_state']),
            scaler=scaler_from_document(scalers['link_state_condition']),
            loss_history=tuple(history.get('link_state', [])),
        )
        vae = VaeModel(
            encoder=net_from_document(nets['vae_encoder']),
            decoder=net_from_document(nets['vae_decoder']),
            scaler=scaler_from_document(scalers['path_condition']),
            latent_dim=int(doc['latent_dim']),
            loss_history=tuple(history.get('vae', [])),
        )
        codec = CodecScalers(
            gain=scaler_from_document(scalers['excess_gain']),
            delay=scaler_from_document(scalers['excess_delay']),
            angle_scale_deg=float(doc['angle_scale_deg']),
        )
        return GenerativeModel(
            link_state=link_state,
            vae=vae,
            codec=codec,
            carrier_hz=float(doc['carrier_hz']),
            env_id=str(doc['env_id']),
            absent_eps=float(doc['absent_eps']),
            version=int(doc['version']),
        )
    except (KeyError, TypeError, ValueError, DimensionMismatchError) as e:
        raise ModelFormatError(f"Malformed model document: {e}")


def _read_json(path: Path) -> Any:
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path.name} is not valid JSON ({e})")


def _write_json(doc: Any, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(doc, f, indent=2)
    return path


def save_model(model: GenerativeModel, path: Union[str, Path]) -> Path:
    """Write the generative model as a single JSON document"""
    path = _write_json(model_to_document(model), Path(path))
    logger.info(f"Model saved: {path}")
    return path


def load_model(path: Union[str, Path]) -> GenerativeModel:
    model = model_from_document(_read_json(Path(path)))
    logger.info(f"Model loaded: {path} (env '{model.env_id}', carrier {model.carrier_hz:.3g} Hz)")
    return model


def params_to_document(params: GppParams) -> GppParamsDocument:
    return {
        'format': GPP_FORMAT,
        'version': GPP_VERSION,
        'kind': params.kind,
        'nominal': list(params.nominal),
        'multipliers': list(params.multipliers),
        'provenance': params.provenance,
    }


def params_from_document(doc: Dict[str, Any]) -> GppParams:
    if not isinstance(doc, dict) or doc.get('format') != GPP_FORMAT:
        raise ModelFormatError("Not a 3GPP parameter file")
    if doc.get('version') != GPP_VERSION:
        raise ModelFormatError(f"Unsupported 3GPP parameter version {doc.get('version')!r}")
    cls = GPP_KINDS.get(doc.get('kind'))
    if cls is None:
        raise ModelFormatError(f"Unknown 3GPP parameter kind {doc.get('kind')!r}")
    try:
        nominal = tuple(float(v) for v in doc['nominal'])
        multipliers = tuple(float(v) for v in doc['multipliers'])
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"Malformed 3GPP parameter document: {e}")
    expected = len(cls.nominal_params().nominal)
    if len(nominal) != expected or len(multipliers) != expected:
        raise ModelFormatError(f"{cls.kind} parameters need {expected} values")
    return cls(nominal, multipliers, str(doc.get('provenance', '')))


def save_params(params: GppParams, path: Union[str, Path]) -> Path:
    path = _write_json(params_to_document(params), Path(path))
    logger.info(f"3GPP {params.kind} parameters saved: {path}")
    return path


def load_params(path: Union[str, Path]) -> GppParams:
    return params_from_document(_read_json(Path(path)))
