"""Pydantic models for experiment configs and the JSON documents bksim prints."""

import hashlib
import json
from fractions import Fraction
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple

from pydantic import AfterValidator, BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = 1


def _check_rational(value: str) -> str:
    try:
        Fraction(value.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"not a 'num/den' rational: {value!r}") from e
    return value.strip()


Rational = Annotated[str, AfterValidator(_check_rational)]


# ============================================================================
# Shared pieces
# ============================================================================

class StrictModel(BaseModel):
    """Unknown fields are config errors, not silently dropped."""
    model_config = ConfigDict(extra="forbid")


class ModelParamsDocument(StrictModel):
    """epsilon, weights, orders and window convention of a BK model."""
    epsilon: Rational
    weights: Dict[str, Any]
    orders: Any
    convention: Literal["recent", "skip_one"] = "recent"


class KernelDocument(BaseModel):
    """Kernel descriptor, as accepted by create_kernel."""
    model_config = ConfigDict(extra="allow")
    variant: Literal["full", "lower", "upper", "mixed", "mixed_prime", "table"]

    def descriptor(self) -> Dict[str, Any]:
        return self.model_dump(exclude_none=True)


class RFunctionDocument(StrictModel):
    kind: Literal["predecessor", "zero", "block_root", "table"] = "predecessor"
    c: Optional[int] = None
    values: Optional[List[int]] = None


class ExperimentBase(StrictModel):
    """Fields every experiment config carries."""
    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    id: str = Field(..., min_length=1)
    seed: Optional[int] = None
    workers: Optional[int] = Field(None, ge=0)
    out: Optional[str] = None

    @field_validator("schema_version")
    @classmethod
    def _known_schema(cls, v: int) -> int:
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {v}")
        return v


# ============================================================================
# Experiment configs, one per subcommand
# ============================================================================

class ForwardWindow(StrictModel):
    past: Literal[1, -1] = 1
    start: int
    end: int


class SimulateConfig(ExperimentBase):
    command: Literal["simulate"] = "simulate"
    kernel: KernelDocument
    window: Optional[Tuple[int, int]] = None
    forward: Optional[ForwardWindow] = None
    replicate: int = 0
    method: Literal["monotone_sandwich", "regeneration_window"] = "monotone_sandwich"
    formats: List[Literal["csv", "packed"]] = Field(default_factory=lambda: ["csv"])
    horizon_cap: Optional[int] = Field(None, gt=0)
    scan_cap: Optional[int] = Field(None, gt=0)

    @model_validator(mode="after")
    def _one_mode(self):
        if (self.window is None) == (self.forward is None):
            raise ValueError("give exactly one of 'window' (perfect sample) or 'forward'")
        return self


class KernelPair(StrictModel):
    a: KernelDocument
    b: KernelDocument


class DbarConfig(ExperimentBase):
    command: Literal["dbar"] = "dbar"
    pairs: List[KernelPair] = Field(..., min_length=1)
    n: int = Field(..., gt=0)
    confidence: Optional[float] = Field(None, gt=0, lt=1)
    exact: bool = True


class RandomTables(StrictModel):
    """Seeded batch of random attractive table kernels."""
    count: int = Field(..., ge=1)
    max_order: int = Field(..., ge=1, le=16)
    seed: int = 0


class EstimateConfig(ExperimentBase):
    command: Literal["estimate"] = "estimate"
    quantity: Literal["marginal", "eta_theta", "concentration"]
    n: int = Field(..., gt=0)
    kernel: Optional[KernelDocument] = None
    kernels: List[KernelDocument] = Field(default_factory=list)
    random_tables: Optional[RandomTables] = None
    grid: List[Tuple[int, int]] = Field(default_factory=list, description="(r, k) instances")
    params: Optional[ModelParamsDocument] = None
    r: Optional[int] = Field(None, ge=0)
    k: Optional[int] = Field(None, ge=0)
    m: Optional[int] = Field(None, ge=1)
    epsilon: Optional[Rational] = None
    tail_max: Optional[int] = Field(None, ge=0)
    confidence: Optional[float] = Field(None, gt=0, lt=1)

    @model_validator(mode="after")
    def _inputs(self):
        if self.quantity == "concentration":
            if self.params is None or ((self.r is None or self.k is None) and not self.grid):
                raise ValueError("concentration needs 'params' and 'r', 'k' or a 'grid'")
        elif self.kernel is None and not self.kernels and self.random_tables is None:
            raise ValueError(f"{self.quantity} needs 'kernel', 'kernels' or 'random_tables'")
        if self.random_tables is not None and self.quantity != "marginal":
            raise ValueError("random tables are only sampled for marginals")
        return self


class ExactConfig(ExperimentBase):
    command: Literal["exact"] = "exact"
    task: Literal["stationary", "dbar", "ledger", "magnetization", "maximal_coupling"]
    kernel: Optional[KernelDocument] = None
    pair: Optional[KernelPair] = None
    params: Optional[ModelParamsDocument] = None
    grid: List[Tuple[int, int]] = Field(default_factory=list, description="(r, k) instances")
    k: Optional[int] = Field(None, ge=0)
    distribution_csv: bool = False

    @model_validator(mode="after")
    def _inputs(self):
        needs = {
            "stationary": ("kernel",),
            "dbar": ("pair",),
            "ledger": ("kernel", "k"),
            "magnetization": ("params", "grid"),
            "maximal_coupling": ("params", "grid"),
        }[self.task]
        missing = [name for name in needs if not getattr(self, name) and getattr(self, name) != 0]
        if missing:
            raise ValueError(f"task '{self.task}' needs {missing}")
        return self


class CriteriumConfig(ExperimentBase):
    command: Literal["check-criterium"] = "check-criterium"
    family: Literal["corollary1", "corollary2", "custom"]
    c: Optional[int] = None
    k_max: Optional[int] = Field(None, ge=0)
    policy: Literal["printed", "exact"] = "printed"
    params: Optional[ModelParamsDocument] = None
    r: RFunctionDocument = Field(default_factory=RFunctionDocument)
    alpha: Optional[Rational] = None
    finite_only: bool = False

    @model_validator(mode="after")
    def _inputs(self):
        if self.family == "custom":
            if self.params is None or self.alpha is None or self.k_max is None:
                raise ValueError("custom family needs 'params', 'alpha' and 'k_max'")
        elif self.c is None:
            raise ValueError(f"{self.family} needs 'c'")
        return self


class GenParamsConfig(ExperimentBase):
    command: Literal["gen-params"] = "gen-params"
    family: Literal["corollary1", "corollary2", "minimal"]
    c: Optional[int] = None
    weights: Optional[Dict[str, Any]] = None
    epsilon: Optional[Rational] = None
    alpha: Optional[Rational] = None
    r: RFunctionDocument = Field(default_factory=RFunctionDocument)
    k_max: int = Field(2, ge=0)
    convention: Literal["recent", "skip_one"] = "recent"

    @model_validator(mode="after")
    def _inputs(self):
        if self.family == "minimal":
            if self.weights is None or self.epsilon is None or self.alpha is None:
                raise ValueError("minimal orders need 'weights', 'epsilon' and 'alpha'")
        elif self.c is None:
            raise ValueError(f"{self.family} needs 'c'")
        return self


class PhaseTransitionConfig(ExperimentBase):
    command: Literal["phase-transition"] = "phase-transition"
    horizon: int = Field(..., gt=0)
    n: int = Field(..., gt=0)
    params: Optional[ModelParamsDocument] = None
    order_cap: Optional[int] = Field(None, ge=1)
    variant: Literal["lower", "upper"] = "lower"
    kernel: Optional[KernelDocument] = None
    confidence: Optional[float] = Field(None, gt=0, lt=1)

    @model_validator(mode="after")
    def _inputs(self):
        if self.kernel is None and (self.params is None or self.order_cap is None):
            raise ValueError("give 'kernel', or 'params' with 'order_cap'")
        return self


CONFIG_MODELS = {
    "simulate": SimulateConfig,
    "dbar": DbarConfig,
    "estimate": EstimateConfig,
    "exact": ExactConfig,
    "check-criterium": CriteriumConfig,
    "gen-params": GenParamsConfig,
    "phase-transition": PhaseTransitionConfig,
}


# ============================================================================
# Output documents
# ============================================================================

class ErrorDocument(BaseModel):
    """What the CLI prints when an operation fails."""
    error: str
    type: str
    message: str
    details: Dict[str, Any] = Field(default_factory=dict)
    exit_code: int


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)


def payload_digest(payload: Any) -> str:
    """sha256 of the canonical payload; wall-clock fields never enter it."""
    return hashlib.sha256(canonical_json(payload).encode()).hexdigest()


class ResultEnvelope(BaseModel):
    """One CLI result document."""
    schema_version: int = Field(SCHEMA_VERSION, serialization_alias="schema")
    command: str
    experiment_id: str
    seed: Optional[int] = None
    payload: Dict[str, Any]
    payload_sha256: str = ""
    timing: Optional[Dict[str, float]] = None

    @model_validator(mode="after")
    def _digest(self):
        self.payload_sha256 = payload_digest(self.payload)
        return self

    def to_json(self) -> str:
        data = self.model_dump(by_alias=True, exclude_none=True)
        return json.dumps(data, sort_keys=True, indent=2, default=str)


class ResultRow(BaseModel):
    """Flat ledger row for one (experiment, seed, quantity)."""
    experiment_id: str
    command: str
    seed: Optional[int] = None
    quantity: str
    estimate: Optional[float] = None
    band_lower: Optional[float] = None
    band_upper: Optional[float] = None
    replications: Optional[int] = None
    failures: Optional[int] = None
    value: Optional[str] = None
    payload_sha256: str
    wall_clock: Optional[float] = None
