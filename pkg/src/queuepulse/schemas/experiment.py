import re
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from queuepulse.schemas.models import ModelSpec

# --- Random inputs ---

Family = Literal["constant", "exponential", "uniform", "erlang", "gamma", "sequence"]
# Families sampled by a monotone transform of one uniform per draw (or a fixed sum of them)
INVERSION_FAMILIES = {"constant", "exponential", "uniform", "erlang", "sequence"}


class ThetaBinding(BaseModel):
    """How coordinate ``index`` of the decision parameter enters a duration."""
    index: int = Field(0, ge=0, description="Coordinate of theta.")
    mode: Literal["scale", "rate", "shift"] = Field(
        "scale", description="scale: tau = theta*x; rate: rate := theta; shift: tau = x + theta."
    )


class DistributionSpec(BaseModel):
    family: Family
    value: Optional[float] = Field(None, ge=0, description="Constant duration.")
    rate: Optional[float] = Field(None, gt=0, description="Rate of exponential, Erlang and gamma families.")
    low: Optional[float] = Field(None, ge=0)
    high: Optional[float] = Field(None, ge=0)
    shape: Optional[float] = Field(None, gt=0, description="Erlang stages (integer) or gamma shape.")
    values: Optional[List[float]] = Field(None, description="Deterministic sequence, cycled.")
    theta: Optional[ThetaBinding] = None

    @model_validator(mode="after")
    def _check_parameters(self):
        required = {
            "constant": ["value"],
            "exponential": ["rate"],
            "uniform": ["low", "high"],
            "erlang": ["rate", "shape"],
            "gamma": ["rate", "shape"],
            "sequence": ["values"],
        }[self.family]
        missing = [name for name in required if getattr(self, name) is None]
        if missing and not (self.theta and self.theta.mode == "rate" and missing == ["rate"]):
            raise ValueError(f"Family '{self.family}' needs {missing}")
        if self.family == "uniform" and self.high < self.low:
            raise ValueError("Uniform needs low <= high")
        if self.family == "erlang" and float(self.shape) != int(self.shape):
            raise ValueError("Erlang shape must be an integer number of stages")
        if self.family == "sequence" and (not self.values or any(v < 0 for v in self.values)):
            raise ValueError("Sequence values must be a nonempty list of nonnegative durations")
        if self.theta and self.theta.mode == "rate" and self.family not in ("exponential", "erlang", "gamma"):
            raise ValueError(f"Rate binding is not defined for family '{self.family}'")
        return self

    @property
    def invertible(self) -> bool:
        return self.family in INVERSION_FAMILIES


# --- Measures ---

MeasureName = Literal["S", "W", "T", "U", "J", "Q", "I", "U_per_server"]
_SELECTOR = re.compile(r"^(?:(?P<system>system)\.)?(?P<name>S|W|T|U|J|Q|I|U_per_server)(?:@(?P<node>\d+))?$")


class MeasureSelector(BaseModel):
    """
    A sample performance measure. Written as ``S`` (node 1), ``W@2`` (node 2)
    or ``system.S`` (customers' end-to-end view of a tandem).
    """
    name: MeasureName
    node: int = Field(1, ge=1)
    system: bool = False

    @model_validator(mode="after")
    def _check_scope(self):
        if self.system and self.name not in ("S", "W"):
            raise ValueError(f"Only S and W have a system-level form, got '{self.name}'")
        return self

    @classmethod
    def parse(cls, text: str) -> "MeasureSelector":
        match = _SELECTOR.match(text.strip())
        if not match:
            raise ValueError(f"Unknown measure '{text}'")
        return cls(
            name=match["name"],
            node=int(match["node"] or 1),
            system=bool(match["system"]),
        )

    @property
    def label(self) -> str:
        if self.system:
            return f"system.{self.name}"
        return f"{self.name}@{self.node}"


# --- Stochastic model and results ---

class StochasticModel(BaseModel):
    """A model plus one distribution per duration role (``service`` covers every ``service.n``)."""
    model: ModelSpec
    distributions: Dict[str, DistributionSpec]

    @model_validator(mode="after")
    def _check_roles(self):
        missing = [role for role in self.model.duration_roles() if self.distribution_for(role) is None]
        if missing:
            raise ValueError(f"No distribution bound to role(s) {missing}")
        return self

    def distribution_for(self, role: str) -> Optional[DistributionSpec]:
        if role in self.distributions:
            return self.distributions[role]
        return self.distributions.get(role.split(".")[0])

    def roles(self) -> List[str]:
        return self.model.duration_roles()

    @property
    def theta_size(self) -> int:
        indices = [d.theta.index for d in self.distributions.values() if d.theta]
        return max(indices) + 1 if indices else 0


class Estimate(BaseModel):
    measure: str
    mean: float
    variance: float = Field(..., ge=0)
    half_width_95: float = Field(..., ge=0)
    replications: int = Field(..., ge=1)
    std_error: float = Field(0.0, ge=0)
    ties: int = Field(0, ge=0, description="Max/min ties met while propagating tangents.")
    unstable: bool = Field(False, description="Batch means trend monotonically.")
    seed: Optional[int] = None
    theta: Optional[List[float]] = None

    @property
    def ci95(self) -> List[float]:
        return [self.mean - self.half_width_95, self.mean + self.half_width_95]


# --- Experiment description ---

Mode = Literal["path", "estimate", "steady", "antithetic", "crn", "ipa", "fd", "sweep", "validate"]


class OutputSpec(BaseModel):
    dir: Optional[str] = Field(None, description="Report directory; defaults to output.dir in settings.")


class ExperimentConfig(StochasticModel):
    name: str = "experiment"
    mode: Mode = "estimate"
    theta: List[float] = Field(default_factory=lambda: [1.0])
    horizon: Union[int, List[int]] = Field(..., description="K, or per-node K^n for networks.")
    replications: int = Field(100, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    measures: List[str] = Field(default_factory=lambda: ["S"])

    warmup: Optional[int] = Field(None, ge=0, description="K0 for steady mode; defaults to a fraction of K.")
    batches: Optional[int] = Field(None, ge=2)
    theta_alt: Optional[List[float]] = Field(None, description="Second theta of crn mode.")
    thetas: Optional[List[float]] = Field(None, description="Grid of sweep mode along `coordinate`.")
    coordinate: int = Field(0, ge=0, description="Theta coordinate differentiated or swept.")
    step: float = Field(1e-4, gt=0, description="Finite-difference step h of fd mode.")
    output: OutputSpec = Field(default_factory=OutputSpec)

    @field_validator("measures")
    @classmethod
    def _check_measures(cls, v):
        for text in v:
            MeasureSelector.parse(text)
        return v

    @field_validator("horizon")
    @classmethod
    def _check_horizon(cls, v):
        values = v if isinstance(v, list) else [v]
        if not values or any(h < 1 for h in values):
            raise ValueError("Horizons must be positive integers")
        return v

    @model_validator(mode="after")
    def _check_mode(self):
        if isinstance(self.horizon, list) and self.model.kind != "network":
            raise ValueError("Per-node horizons are only defined for networks")
        if self.theta_size > len(self.theta):
            raise ValueError(f"theta needs {self.theta_size} coordinates, got {len(self.theta)}")
        for selector in self.selectors():
            if selector.node > getattr(self.model, "node_count", 1):
                raise ValueError(f"Measure '{selector.label}' references a missing node")
        if self.mode in ("estimate", "antithetic", "crn", "ipa", "fd", "sweep") and self.replications < 2:
            raise ValueError(f"Mode '{self.mode}' needs at least 2 replications")
        if self.mode == "crn" and self.theta_alt is None:
            raise ValueError("Mode 'crn' needs theta_alt")
        if self.mode == "sweep" and not self.thetas:
            raise ValueError("Mode 'sweep' needs a thetas grid")
        if self.mode in ("ipa", "fd", "sweep") and self.coordinate >= len(self.theta):
            raise ValueError(f"coordinate {self.coordinate} is outside theta")
        if self.mode == "steady" and self.warmup is not None and self.warmup >= self.scalar_horizon:
            raise ValueError("warmup must be smaller than the horizon")
        return self

    def selectors(self) -> List[MeasureSelector]:
        return [MeasureSelector.parse(text) for text in self.measures]

    @property
    def scalar_horizon(self) -> int:
        return max(self.horizon) if isinstance(self.horizon, list) else self.horizon
