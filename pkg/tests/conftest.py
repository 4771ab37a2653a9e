import math
import os

# Must be set before queuepulse.config is imported
os.environ.setdefault("ENV_FOR_DYNACONF", "test")

import numpy as np
import pytest

from queuepulse.schemas.experiment import ExperimentConfig, StochasticModel
from queuepulse.schemas.models import (
    BlockingTandemModel,
    ClosedTandemModel,
    GG1Model,
    GGmModel,
    NetworkModel,
    RoutingPlan,
    TandemModel,
)
from queuepulse.types import UNBOUNDED

CORPUS_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "config", "experiments")

SWEEP_KINDS = ("gg1", "tandem", "blocking_tandem", "closed_tandem", "ggm", "network")

# (model, durations, departures per node), all evaluated by hand
HAND_EXAMPLES = {
    "gg1_zero_service": (
        GG1Model(),
        {"interarrival": [1.0], "service": [0.0]},
        [[1.0]],
    ),
    "tandem_unbounded": (
        TandemModel(node_count=2),
        {"interarrival": [1.0, 1.0], "service.1": [1.0, 1.0], "service.2": [3.0, 1.0]},
        [[2.0, 3.0], [5.0, 6.0]],
    ),
    "tandem_manufacturing": (
        BlockingTandemModel(node_count=2, buffers=[0], blocking="manufacturing"),
        {"interarrival": [0.0, 0.0], "service.1": [1.0, 1.0], "service.2": [5.0, 5.0]},
        [[1.0, 6.0], [6.0, 11.0]],
    ),
    "tandem_communication": (
        BlockingTandemModel(node_count=2, buffers=[0], blocking="communication"),
        {"interarrival": [0.0, 0.0], "service.1": [1.0, 1.0], "service.2": [5.0, 5.0]},
        [[1.0, 7.0], [6.0, 12.0]],
    ),
    "closed_tandem_one_customer": (
        ClosedTandemModel(node_count=2, populations=[1, 0]),
        {"service.1": [1.0] * 3, "service.2": [2.0] * 3},
        [[1.0, 4.0, 7.0], [3.0, 6.0, 9.0]],
    ),
    "closed_tandem_single_node": (
        ClosedTandemModel(node_count=1, populations=[2]),
        {"service.1": [1.0] * 5},
        [[1.0, 2.0, 3.0, 4.0, 5.0]],
    ),
    "ggm_overtaking": (
        GGmModel(servers=2),
        {"interarrival": [0.0, 0.0, 0.0], "service": [3.0, 1.0, 1.0]},
        [[1.0, 2.0, 3.0]],
    ),
    "network_two_cycle": (
        NetworkModel(node_count=2, populations=[1, 0], routing=RoutingPlan.cyclic(2)),
        {"service.1": [1.0] * 3, "service.2": [2.0] * 3},
        [[1.0, 4.0, 7.0], [3.0, 6.0, 9.0]],
    ),
    "network_self_loop": (
        NetworkModel(node_count=1, populations=[1], routing=RoutingPlan.cyclic(1)),
        {"service.1": [2.0, 3.0]},
        [[2.0, 5.0]],
    ),
}


def _draw_durations(rng, size: int) -> np.ndarray:
    """Exponential, uniform or small-integer durations; the integers bring ties and zeros."""
    family = rng.choice(["exponential", "uniform", "integer"])
    if family == "exponential":
        return rng.exponential(1.0 / rng.uniform(0.5, 2.0), size)
    if family == "uniform":
        return rng.uniform(0.0, rng.uniform(0.5, 3.0), size)
    return rng.integers(0, 4, size).astype(float)


def _populations(rng, n_nodes: int):
    populations = [int(p) for p in rng.integers(0, 4, n_nodes)]
    if not any(populations):
        populations[int(rng.integers(n_nodes))] = 1
    return populations


def _random_network(rng, n_nodes: int, horizon: int):
    """
    Every node routes to its successor on a random cycle plus up to two extra
    targets, so all nodes keep being visited. Node horizons follow the visit
    rates and the service sequences leave room for routing imbalance.
    """
    order = rng.permutation(n_nodes)
    successor = {int(order[i]): int(order[(i + 1) % n_nodes]) for i in range(n_nodes)}
    sequences = []
    for n in range(n_nodes):
        extra = [int(t) + 1 for t in rng.integers(0, n_nodes, int(rng.integers(0, 3)))]
        sequences.append([int(t) for t in rng.permutation([successor[n] + 1] + extra)])

    share = np.zeros((n_nodes, n_nodes))
    for n, sequence in enumerate(sequences):
        for t in sequence:
            share[n, t - 1] += 1.0 / len(sequence)
    lhs = np.vstack([share.T - np.eye(n_nodes), np.ones(n_nodes)])
    rates = np.linalg.lstsq(lhs, np.concatenate([np.zeros(n_nodes), [1.0]]), rcond=None)[0]

    horizons = [max(1, int(horizon * r / rates.max())) for r in rates]
    lengths = [3 * h + 10 * math.ceil(r / rates.min()) + 100 for h, r in zip(horizons, rates)]
    model = NetworkModel(
        node_count=n_nodes,
        populations=_populations(rng, n_nodes),
        routing=RoutingPlan(node_count=n_nodes, routes=[{"sequence": s} for s in sequences]),
    )
    durations = {f"service.{n}": _draw_durations(rng, lengths[n - 1]) for n in range(1, n_nodes + 1)}
    return model, durations, horizons


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def gg1_example():
    """alpha = 1, tau = 2, K = 3: A = (1, 2, 3), D = (3, 5, 7)."""
    return {"interarrival": [1.0, 1.0, 1.0], "service": [2.0, 2.0, 2.0]}


@pytest.fixture
def blocking_example():
    """Two nodes, B_2 = 0, unit gaps, tau^1 = 1, tau^2 = 3."""
    return {
        "interarrival": [1.0, 1.0, 1.0],
        "service.1": [1.0, 1.0, 1.0],
        "service.2": [3.0, 3.0, 3.0],
    }


@pytest.fixture
def pattern_network():
    """Node 1 alternates between nodes 2 and 3, both feed node 4, which returns to node 1."""
    return NetworkModel(
        node_count=4,
        populations=[2, 1, 0, 1],
        routing=RoutingPlan(
            node_count=4,
            routes=[{"sequence": [2, 3]}, {"sequence": [4]}, {"sequence": [4]}, {"sequence": [1]}],
        ),
    )


@pytest.fixture
def model_factory(pattern_network):
    """Builds one model of every kind, keyed by kind."""
    def _build(kind: str):
        return {
            "gg1": GG1Model(),
            "tandem": TandemModel(node_count=3),
            "blocking_manufacturing": BlockingTandemModel(node_count=3, buffers=[0, 1], blocking="manufacturing"),
            "blocking_communication": BlockingTandemModel(node_count=3, buffers=[1, 0], blocking="communication"),
            "closed_tandem": ClosedTandemModel(node_count=3, populations=[2, 0, 1]),
            "ggm": GGmModel(servers=3),
            "network": pattern_network,
        }[kind]
    return _build


@pytest.fixture
def random_durations(rng):
    """Exponential durations for every role of ``model``; networks get twice their horizon."""
    def _draw(model, horizon: int, rate: float = 1.0):
        length = 2 * horizon if model.kind == "network" else horizon
        return {role: rng.exponential(1.0 / rate, length) for role in model.duration_roles()}
    return _draw


@pytest.fixture(params=sorted(HAND_EXAMPLES))
def hand_example(request):
    return HAND_EXAMPLES[request.param]


@pytest.fixture
def random_instance():
    """
    ``(model, durations, horizon)`` for index ``seed``: up to 5 nodes, 4 servers
    and 1000 customers, with mixed duration families. Kinds rotate with the
    index unless one is forced.
    """
    def _build(seed: int, kind: str = None, horizon: int = None):
        rng = np.random.default_rng([20240611, seed])
        kind = kind or SWEEP_KINDS[seed % len(SWEEP_KINDS)]
        horizon = horizon or int(round(10 ** rng.uniform(0.0, 3.0)))
        n_nodes = int(rng.integers(1, 6))

        if kind == "network":
            return _random_network(rng, n_nodes, horizon)
        if kind == "gg1":
            model = GG1Model()
        elif kind == "tandem":
            model = TandemModel(node_count=n_nodes)
        elif kind == "blocking_tandem":
            buffers = [UNBOUNDED if rng.uniform() < 0.2 else int(rng.integers(0, 4)) for _ in range(n_nodes - 1)]
            model = BlockingTandemModel(
                node_count=n_nodes,
                buffers=buffers,
                blocking=str(rng.choice(["manufacturing", "communication"])),
            )
        elif kind == "closed_tandem":
            model = ClosedTandemModel(node_count=n_nodes, populations=_populations(rng, n_nodes))
        else:
            model = GGmModel(servers=int(rng.integers(1, 5)))
        durations = {role: _draw_durations(rng, horizon) for role in model.duration_roles()}
        return model, durations, horizon
    return _build


@pytest.fixture
def deterministic_gg1():
    """Constant gaps of 1 and services tau = 1 + theta (shift-bound), so tau = 2 at theta = 1."""
    return StochasticModel.model_validate({
        "model": {"kind": "gg1"},
        "distributions": {
            "interarrival": {"family": "constant", "value": 1.0},
            "service": {"family": "constant", "value": 1.0, "theta": {"index": 0, "mode": "shift"}},
        },
    })


@pytest.fixture
def mm1():
    """lambda = 0.5, service mean theta."""
    return StochasticModel.model_validate({
        "model": {"kind": "gg1"},
        "distributions": {
            "interarrival": {"family": "exponential", "rate": 0.5},
            "service": {"family": "exponential", "rate": 1.0, "theta": {"index": 0, "mode": "scale"}},
        },
    })


@pytest.fixture
def experiment_data(tmp_path):
    """Raw experiment mapping of the deterministic G/G/1 path example."""
    return {
        "name": "gg1_path",
        "mode": "path",
        "model": {"kind": "gg1"},
        "distributions": {
            "interarrival": {"family": "constant", "value": 1.0},
            "service": {"family": "constant", "value": 2.0},
        },
        "horizon": 3,
        "replications": 2,
        "seed": 0,
        "measures": ["S", "W", "T"],
        "output": {"dir": str(tmp_path / "out")},
    }


@pytest.fixture
def experiment(experiment_data):
    return ExperimentConfig.model_validate(experiment_data)
