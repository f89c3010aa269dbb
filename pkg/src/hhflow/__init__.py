"""Flow-equation diagonalization of the quantum Hénon–Heiles Hamiltonian."""
from .algebra import FlowParameters, Monomial, OperatorPolynomial, build_henon_heiles, commutator
from .cutoff import derive_flow_odes, run_cutoff
from .iterative import iterate_flow

__all__ = [
    "FlowParameters",
    "Monomial",
    "OperatorPolynomial",
    "build_henon_heiles",
    "commutator",
    "derive_flow_odes",
    "iterate_flow",
    "run_cutoff",
]
