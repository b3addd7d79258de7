"""Spiking BCPNN: Hebbian-Bayesian representation learning with hypercolumn
soft winner-take-all and structural plasticity.

Modules: ``dynamics`` (trace and support equations), ``topology`` (layer
geometry, sparse connectivity, rewiring), ``engine`` (time-stepped
simulation and training), ``dataio`` (IDX files), ``readout`` (linear
classifier), ``metrics`` (rates, support traces, receptive fields),
``config``/``experiment``/``cli`` (runs from the command line).
"""

from .dynamics import SimParams
from .engine import BiasRegulation, Network, ProtocolParams, RunMode, extract_features, train_unsupervised
from .errors import ConfigError, ContractViolation, IdxParseError
from .topology import LayerGeometry, RewireSchedule

__version__ = "0.1.0"

__all__ = [
    "BiasRegulation",
    "ConfigError",
    "ContractViolation",
    "IdxParseError",
    "LayerGeometry",
    "Network",
    "ProtocolParams",
    "RewireSchedule",
    "RunMode",
    "SimParams",
    "extract_features",
    "train_unsupervised",
]
