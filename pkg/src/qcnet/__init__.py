"""Quantum causal networks: graphs with directed (causal) and undirected
(entanglement) edges, quantum local distributions, joint-state construction
by forward propagation, and the rd/do interventions."""

from importlib import resources

from .errors import (DimensionCapError, DimensionError, InterventionError, InvalidOperationError,
                     InvalidSagError, InvalidStateError, NetworkError, NotHermitianError,
                     NumericError, ParseError, QcnError, SemanticError, ZeroProbabilityError)
from .intervene import (Intervention, InterventionOutcome, apply_sequence, condition, do_set, rd_deterministic,
                        rd_general, reduce_network)
from .qcn import (CheckPolicy, JointState, LocalDistribution, QuantumCausalNetwork, build_joint,
                  marginal, parameter_count, respects_child, respects_root)
from .qop import QuantumOperation
from .qstate import DensityOperator, Hamiltonian, ProjectionSet
from .sag import CnSet, Sag, cn_partition, cn_topological_order, contemporaneous, precedes, validate_sag

__version__ = "0.1.0"

__all__ = [
    "CheckPolicy", "CnSet", "DensityOperator", "DimensionCapError", "DimensionError", "Hamiltonian",
    "Intervention", "InterventionError", "InterventionOutcome", "InvalidOperationError",
    "InvalidSagError", "InvalidStateError", "JointState", "LocalDistribution", "NetworkError",
    "NotHermitianError", "NumericError", "ParseError", "ProjectionSet", "QcnError",
    "QuantumCausalNetwork", "QuantumOperation", "Sag", "SemanticError", "ZeroProbabilityError",
    "apply_sequence", "build_joint", "cn_partition", "cn_topological_order", "condition",
    "contemporaneous", "do_set", "marginal", "model_path", "parameter_count", "precedes",
    "rd_deterministic", "rd_general", "reduce_network", "respects_child", "respects_root",
    "validate_sag",
]


def model_path(name: str) -> str:
    """Filesystem path of a bundled example model."""
    return str(resources.files(__name__).joinpath("models", name))
