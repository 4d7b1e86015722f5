"""Dense statevector simulation: gates, exact expectations, finite-shot sampling."""
from .gates import Gate, cnot, rx, ry, rz
from .pauli import (
    PauliObservable,
    PauliString,
    group_qubitwise_commuting,
    is_qubitwise_commuting,
    validate_grouping,
)
from .statevector import (
    MAX_QUBITS,
    StateVector,
    apply_gate,
    expectation,
    sample_from_expectation,
    sample_group_rows,
    sample_observable,
    sample_term,
)

__all__ = [
    "Gate", "cnot", "rx", "ry", "rz",
    "PauliObservable", "PauliString", "group_qubitwise_commuting", "is_qubitwise_commuting",
    "validate_grouping",
    "MAX_QUBITS", "StateVector", "apply_gate", "expectation", "sample_from_expectation",
    "sample_group_rows", "sample_observable", "sample_term",
]
