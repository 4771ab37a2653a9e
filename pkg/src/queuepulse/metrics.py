"""
Sample performance measures of a finished path.

Node measures over customers 1..K:

    S = sum(D - A) / K          W = sum(D - A - tau) / K
    T = K / D_K                 U = sum(tau) / D_K
    J = sum(D - A) / D_K        Q = sum(D - A - tau) / D_K

Multi-server paths use C in place of D in S, W, J and Q; T and U keep D_K.
``window_measure`` evaluates the same ratios over customers first..last with
D_{first-1} as the time origin, which is what batch means consume.
"""
from typing import Dict, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from queuepulse.schemas.experiment import MeasureSelector
from queuepulse.types import DomainError, InputLengthError, SamplePath, UnsupportedError

PER_CUSTOMER = ("S", "W", "I")


class NodeMetrics(BaseModel):
    S: float = Field(..., description="Average total time per customer.")
    W: float = Field(..., description="Average waiting time.")
    T: float = Field(..., description="Throughput rate.")
    U: float = Field(..., description="Server utilization (pooled over servers).")
    J: float = Field(..., description="Average number at the node.")
    Q: float = Field(..., description="Average queue length.")
    U_per_server: Optional[float] = Field(None, description="U / m for multi-server nodes.")


class SystemMetrics(BaseModel):
    S: float
    W: float


def _prefix(seq: Sequence[float], horizon: int, name: str) -> np.ndarray:
    arr = np.asarray(seq, dtype=float)
    if horizon < 1 or arr.size < horizon:
        raise InputLengthError(f"{name} has {arr.size} items, horizon needs {horizon}")
    return arr[:horizon]


def _ratios(holding: np.ndarray, tau: np.ndarray, span: float) -> Dict[str, float]:
    if span <= 0:
        raise DomainError("Throughput is undefined: the last departure epoch is not after the time origin")
    count = holding.size
    waiting = holding - tau
    return {
        "S": float(holding.sum() / count),
        "W": float(waiting.sum() / count),
        "T": count / span,
        "U": float(tau.sum() / span),
        "J": float(holding.sum() / span),
        "Q": float(waiting.sum() / span),
    }


def node_metrics(path: SamplePath, node: int, services: Sequence[float], horizon: int) -> NodeMetrics:
    a = _prefix(path.node_arrivals(node), horizon, f"arrivals of node {node}")
    d = _prefix(path.node_departures(node), horizon, f"departures of node {node}")
    tau = _prefix(services, horizon, f"services of node {node}")
    return NodeMetrics(**_ratios(d - a, tau, d[-1]))


def multiserver_metrics(path: SamplePath, services: Sequence[float], horizon: int, servers: Optional[int] = None) -> NodeMetrics:
    if path.completions is None:
        raise DomainError("Path carries no completion epochs")
    a = _prefix(path.node_arrivals(1), horizon, "arrivals")
    c = _prefix(path.completions, horizon, "completions")
    d = _prefix(path.node_departures(1), horizon, "departures")
    tau = _prefix(services, horizon, "services")
    values = _ratios(c - a, tau, d[-1])
    if servers:
        values["U_per_server"] = values["U"] / servers
    return NodeMetrics(**values)


def system_metrics(path: SamplePath, services: Sequence[Sequence[float]], horizon: int) -> SystemMetrics:
    """End-to-end time of customers entering node 1 and leaving node N."""
    a = _prefix(path.node_arrivals(1), horizon, "system arrivals")
    d = _prefix(path.node_departures(path.node_count), horizon, "system departures")
    if len(services) < path.node_count:
        raise InputLengthError(f"Expected {path.node_count} service sequences, got {len(services)}")
    total = sum(_prefix(services[n], horizon, f"services of node {n + 1}") for n in range(path.node_count))
    return SystemMetrics(S=float(np.mean(d - a)), W=float(np.mean(d - a - total)))


def idle_time(path: SamplePath, node: int, services: Sequence[float], horizon: int) -> float:
    """
    Average of D^n_k - (D^{n-1}_k v D^n_{k-1}) - tau^n_k. The node's own
    arrival sequence plays D^{n-1}, so node 1 reads the external arrivals.
    """
    return float(np.mean(_idle_series(path, node, services, horizon)))


def _idle_series(path: SamplePath, node: int, services: Sequence[float], horizon: int) -> np.ndarray:
    a = _prefix(path.node_arrivals(node), horizon, f"arrivals of node {node}")
    d = _prefix(path.node_departures(node), horizon, f"departures of node {node}")
    tau = _prefix(services, horizon, f"services of node {node}")
    prev = np.concatenate(([0.0], d[:-1]))
    return d - np.maximum(a, prev) - tau


# --- Selector dispatch ---


def node_services(model, durations: Mapping[str, Sequence[float]], node: int) -> Sequence[float]:
    if model.kind in ("gg1", "ggm"):
        return durations["service"]
    return durations[f"service.{node}"]


def node_horizon(path: SamplePath, node: int, horizon: Optional[int] = None) -> int:
    if path.horizons is not None:
        return path.horizons[node - 1]
    return path.horizon if horizon is None else int(horizon)


def customer_series(
    model,
    path: SamplePath,
    durations: Mapping[str, Sequence[float]],
    selector: MeasureSelector,
    horizon: Optional[int] = None,
) -> np.ndarray:
    """Per-customer system times (S), waiting times (W) or idle times (I)."""
    if selector.name not in PER_CUSTOMER:
        raise UnsupportedError(f"Measure '{selector.name}' has no per-customer form")
    if selector.system:
        k = path.horizon if horizon is None else int(horizon)
        a = _prefix(path.node_arrivals(1), k, "system arrivals")
        d = _prefix(path.node_departures(path.node_count), k, "system departures")
        series = d - a
        if selector.name == "W":
            series = series - sum(
                _prefix(node_services(model, durations, n), k, f"services of node {n}")
                for n in range(1, path.node_count + 1)
            )
        return series

    node = selector.node
    k = node_horizon(path, node) if horizon is None else int(horizon)
    tau = _prefix(node_services(model, durations, node), k, f"services of node {node}")
    if selector.name == "I":
        return _idle_series(path, node, tau, k)
    a = _prefix(path.node_arrivals(node), k, f"arrivals of node {node}")
    done = path.completions if model.kind == "ggm" else path.node_departures(node)
    holding = _prefix(done, k, f"completions of node {node}") - a
    return holding if selector.name == "S" else holding - tau


def window_measure(
    model,
    path: SamplePath,
    durations: Mapping[str, Sequence[float]],
    selector: MeasureSelector,
    first: int,
    last: int,
) -> float:
    """Measure over customers first..last (1-based, inclusive)."""
    if not 1 <= first <= last:
        raise DomainError(f"Invalid customer window {first}..{last}")
    if selector.name in PER_CUSTOMER:
        return float(np.mean(customer_series(model, path, durations, selector, last)[first - 1:]))

    node = selector.node
    d = _prefix(path.node_departures(node), last, f"departures of node {node}")
    tau = _prefix(node_services(model, durations, node), last, f"services of node {node}")[first - 1:]
    base = d[first - 2] if first > 1 else 0.0
    holding = customer_series(model, path, durations, MeasureSelector(name="S", node=node), last)[first - 1:]
    values = _ratios(holding, tau, d[-1] - base)
    if selector.name == "U_per_server":
        return values["U"] / getattr(model, "servers", 1)
    return values[selector.name]


def evaluate_measure(
    model,
    path: SamplePath,
    durations: Mapping[str, Sequence[float]],
    selector: MeasureSelector,
    horizon: Optional[int] = None,
) -> float:
    """Measure over the node's full horizon (K^n for networks)."""
    if selector.system:
        if model.kind not in ("gg1", "tandem", "blocking_tandem"):
            raise UnsupportedError(f"System measures need an open single-server model, got '{model.kind}'")
        k = path.horizon if horizon is None else int(horizon)
    else:
        k = node_horizon(path, selector.node, horizon)
    return window_measure(model, path, durations, selector, 1, k)
