"""
Type definitions for common data structures across the application
"""

from typing import TypedDict, List, Dict, Any, Optional


class ValidationReport(TypedDict):
    """Findings of a link record validation (empty findings means valid)"""
    valid: bool
    findings: List[str]


class NetworkSummary(TypedDict):
    """Layer layout and parameter count of one dense network"""
    name: str
    layer_sizes: List[int]
    parameters: int


class DenseNetDocument(TypedDict):
    """Serialized dense network inside a model file"""
    layer_sizes: List[int]
    hidden_activation: str
    output_activation: str
    weights: List[List[List[float]]]
    biases: List[List[float]]


class ScalerDocument(TypedDict):
    """Serialized min-max scaler limits"""
    lower: List[float]
    upper: List[float]
    pinned: List[bool]


class GppParamsDocument(TypedDict):
    """Serialized 3GPP baseline parameters (nominal values and fitted multipliers)"""
    format: str
    version: int
    kind: str
    nominal: List[float]
    multipliers: List[float]
    provenance: str


class EvalMetric(TypedDict):
    """Single evaluation statistic for one model source and gNB type"""
    metric: str
    source: str
    gnb_type: str
    value: float


class CommandResult(TypedDict):
    """Result of a CLI command execution"""
    success: bool
    error: Optional[str]
    outputs: List[str]


class RunManifest(TypedDict):
    """Everything needed to repeat a command run"""
    command: str
    args: Dict[str, Any]
    seed: int
    inputs: Dict[str, str]
    config: Dict[str, Any]
    outputs: List[str]
    summary: Dict[str, Any]
    version: str
