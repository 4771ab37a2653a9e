"""Recursion-based queueing simulation, Monte Carlo estimation and perturbation analysis."""
from queuepulse.engines import get_engine, simulate
from queuepulse.engines.multiserver import departure_bruteforce, simulate_ggm
from queuepulse.engines.network import arrival_epoch_bruteforce, simulate_network, tandem_as_network
from queuepulse.engines.single_server import simulate_closed_tandem, simulate_gg1, simulate_open_tandem
from queuepulse.types import SamplePath

__version__ = "0.1.0"

__all__ = [
    "SamplePath",
    "get_engine",
    "simulate",
    "simulate_gg1",
    "simulate_open_tandem",
    "simulate_closed_tandem",
    "simulate_ggm",
    "departure_bruteforce",
    "simulate_network",
    "arrival_epoch_bruteforce",
    "tandem_as_network",
]
