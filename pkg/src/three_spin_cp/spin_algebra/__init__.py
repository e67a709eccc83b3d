"""Spin-1/2 product-space algebra, average Hamiltonians and propagation."""
from .system import ABUNDANT, GAMMA, RARE, Spin, SpinSystem
from .operators import (amplitude, check_deviation, commutator, deviation_state, embed_operator,
                        fictitious_operator, identity, is_hermitian, is_unitary, unitarity_error,
                        zq_dq_operator)
from .magnus import project_coefficients, second_order_average_hamiltonian
from .propagation import ModulatedHamiltonian, default_step, evolve_piecewise

__all__ = [
    "ABUNDANT", "GAMMA", "RARE", "Spin", "SpinSystem",
    "amplitude", "check_deviation", "commutator", "deviation_state", "embed_operator",
    "fictitious_operator", "identity", "is_hermitian", "is_unitary", "unitarity_error", "zq_dq_operator",
    "project_coefficients", "second_order_average_hamiltonian",
    "ModulatedHamiltonian", "default_step", "evolve_piecewise",
]
