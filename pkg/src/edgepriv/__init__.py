"""Average consensus with edge-based perturbations, attackers and twin checks."""
from . import adversary, ct_engine, dt_engine, graph, perturb, twin_lab
from .ct_engine import CtConfig
from .dt_engine import ConfigError, DtConfig
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "CtConfig",
    "DtConfig",
    "adversary",
    "ct_engine",
    "dt_engine",
    "graph",
    "perturb",
    "twin_lab",
]
