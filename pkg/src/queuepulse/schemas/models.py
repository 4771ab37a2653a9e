from typing import List, Literal, Optional, Union
from typing_extensions import Annotated
from pydantic import BaseModel, Field, field_validator, model_validator

from queuepulse.types import UNBOUNDED, Blocking, Capacity

# --- Structural specs ---

class TandemSpec(BaseModel):
    """Open tandem of single-server nodes; buffers list B_2..B_N (B_1 is always unbounded)."""
    node_count: int = Field(..., ge=1, description="Number of nodes N.")
    buffers: List[Capacity] = Field(default_factory=list, description="Capacities B_2..B_N; empty means all unbounded.")
    blocking: Blocking = Field(Blocking.MANUFACTURING, description="Blocking rule, ignored when all buffers are unbounded.")

    @field_validator("buffers")
    @classmethod
    def _check_buffers(cls, v):
        for b in v:
            if b != UNBOUNDED and (not isinstance(b, int) or b < 0):
                raise ValueError(f"Buffer capacity must be a nonnegative integer or '{UNBOUNDED}', got {b!r}")
        return v

    @model_validator(mode="after")
    def _check_length(self):
        if self.buffers and len(self.buffers) != self.node_count - 1:
            raise ValueError(f"Expected {self.node_count - 1} buffer capacities (B_2..B_N), got {len(self.buffers)}")
        return self

    def buffer(self, node: int) -> Capacity:
        """Capacity B_node for node in 1..N."""
        if node <= 1 or not self.buffers:
            return UNBOUNDED
        return self.buffers[node - 2]

    @property
    def all_unbounded(self) -> bool:
        return all(b == UNBOUNDED for b in self.buffers)


class ClosedTandemSpec(BaseModel):
    node_count: int = Field(..., ge=1)
    populations: List[int] = Field(..., description="Initial populations K_1..K_N.")

    @field_validator("populations")
    @classmethod
    def _check_populations(cls, v):
        if any(p < 0 for p in v):
            raise ValueError("Initial populations must be nonnegative")
        return v

    @model_validator(mode="after")
    def _check_length(self):
        if len(self.populations) != self.node_count:
            raise ValueError(f"Expected {self.node_count} populations, got {len(self.populations)}")
        return self


class GGmSpec(BaseModel):
    servers: int = Field(..., ge=1, description="Number of parallel servers m.")


class RouteRule(BaseModel):
    """Next-node rule s_n of one node: an explicit list, or a pattern cycled indefinitely."""
    sequence: List[int] = Field(..., min_length=1, description="1-based target node indices.")
    periodic: bool = Field(True, description="Cycle the sequence; otherwise it is an explicit finite list.")

    def target(self, k: int) -> Optional[int]:
        """Target of the k-th departure (k >= 1), or None past an explicit list."""
        if self.periodic:
            return self.sequence[(k - 1) % len(self.sequence)]
        if k <= len(self.sequence):
            return self.sequence[k - 1]
        return None

    def covers(self, count: int) -> bool:
        return self.periodic or len(self.sequence) >= count


class RoutingPlan(BaseModel):
    node_count: int = Field(..., ge=1)
    routes: List[RouteRule]

    @model_validator(mode="after")
    def _check_routes(self):
        if len(self.routes) != self.node_count:
            raise ValueError(f"Expected {self.node_count} route rules, got {len(self.routes)}")
        for n, rule in enumerate(self.routes, start=1):
            bad = [s for s in rule.sequence if not 1 <= s <= self.node_count]
            if bad:
                raise ValueError(f"Node {n} routes to invalid node(s) {bad}")
        return self

    def target(self, node: int, k: int) -> Optional[int]:
        return self.routes[node - 1].target(k)

    @classmethod
    def cyclic(cls, node_count: int) -> "RoutingPlan":
        """n -> n+1, N -> 1."""
        return cls(
            node_count=node_count,
            routes=[RouteRule(sequence=[n % node_count + 1]) for n in range(1, node_count + 1)],
        )


class NetworkSpec(BaseModel):
    node_count: int = Field(..., ge=1)
    populations: List[Capacity] = Field(..., description="Initial populations K_n, integers or 'unbounded'.")
    routing: RoutingPlan

    @field_validator("populations")
    @classmethod
    def _check_populations(cls, v):
        for p in v:
            if p != UNBOUNDED and (not isinstance(p, int) or p < 0):
                raise ValueError(f"Population must be a nonnegative integer or '{UNBOUNDED}', got {p!r}")
        return v

    @model_validator(mode="after")
    def _check_shape(self):
        if len(self.populations) != self.node_count:
            raise ValueError(f"Expected {self.node_count} populations, got {len(self.populations)}")
        if self.routing.node_count != self.node_count:
            raise ValueError("Routing plan node count does not match the network")
        if all(p == 0 for p in self.populations):
            raise ValueError("At least one node needs a positive or unbounded population")
        return self


# --- Tagged model descriptions ---

class GG1Model(BaseModel):
    kind: Literal["gg1"] = Field("gg1", description="Single-server FCFS queue.")

    def duration_roles(self) -> List[str]:
        return ["interarrival", "service"]


class TandemModel(TandemSpec):
    kind: Literal["tandem"] = Field("tandem", description="Open tandem with unbounded buffers.")

    @model_validator(mode="after")
    def _check_unbounded(self):
        if not self.all_unbounded:
            raise ValueError("Use kind 'blocking_tandem' for finite buffers")
        return self

    def duration_roles(self) -> List[str]:
        return ["interarrival"] + [f"service.{n}" for n in range(1, self.node_count + 1)]


class BlockingTandemModel(TandemSpec):
    kind: Literal["blocking_tandem"] = Field("blocking_tandem", description="Open tandem with finite buffers.")

    def duration_roles(self) -> List[str]:
        return ["interarrival"] + [f"service.{n}" for n in range(1, self.node_count + 1)]


class ClosedTandemModel(ClosedTandemSpec):
    kind: Literal["closed_tandem"] = Field("closed_tandem", description="Closed tandem with recirculating customers.")

    def duration_roles(self) -> List[str]:
        return [f"service.{n}" for n in range(1, self.node_count + 1)]


class GGmModel(GGmSpec):
    kind: Literal["ggm"] = Field("ggm", description="Multi-server FCFS queue.")

    def duration_roles(self) -> List[str]:
        return ["interarrival", "service"]


class NetworkModel(NetworkSpec):
    kind: Literal["network"] = Field("network", description="Closed network with deterministic routing.")

    def duration_roles(self) -> List[str]:
        return [f"service.{n}" for n in range(1, self.node_count + 1)]


ModelSpec = Annotated[
    Union[
        GG1Model,
        TandemModel,
        BlockingTandemModel,
        ClosedTandemModel,
        GGmModel,
        NetworkModel,
    ],
    Field(discriminator="kind")
]
