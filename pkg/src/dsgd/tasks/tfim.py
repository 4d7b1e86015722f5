"""Critical transverse-field Ising chain with the sigma-block ansatz."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..circuits import ParamCircuit, build_sigma_block_ansatz
from ..gradients import ShiftRule, derive_shift_rule
from ..rng import RngStream, as_stream
from ..simcore.pauli import PauliObservable
from .common import ground_energy, observable_loss


def tfim_hamiltonian(num_qubits: int) -> PauliObservable:
    """``sum_j Z_j Z_{j+1} + sum_j X_j`` on an open chain."""
    if num_qubits < 2:
        raise ValueError("the chain needs at least 2 qubits")
    zz = [(1.0, f"Z{j} Z{j + 1}") for j in range(num_qubits - 1)]
    x = [(1.0, f"X{j}") for j in range(num_qubits)]
    return PauliObservable(zz + x)


@dataclass(eq=False)
class TfimTask:
    num_qubits: int
    num_blocks: int
    hamiltonian: PauliObservable = field(init=False)
    circuit: ParamCircuit = field(init=False)

    def __post_init__(self):
        self.hamiltonian = tfim_hamiltonian(self.num_qubits)
        self.circuit = build_sigma_block_ansatz(self.num_qubits, self.num_blocks)

    kind = "tfim"

    @property
    def num_params(self) -> int:
        return self.circuit.num_params

    @cached_property
    def rule(self) -> ShiftRule:
        return derive_shift_rule(self.circuit)

    @cached_property
    def ground_energy(self) -> float:
        return ground_energy(self.hamiltonian, self.num_qubits)

    def initial_theta(self, rng: RngStream | int) -> np.ndarray:
        """Uniform in [0, 2 pi) for every slot."""
        return as_stream(rng).child("init").generator().uniform(0.0, 2 * np.pi, self.num_params)

    def loss(self, theta) -> float:
        return observable_loss(self.circuit, self.hamiltonian, theta)

    def evaluate_loss(self, theta, mode="exact", rng=None) -> float:
        return observable_loss(self.circuit, self.hamiltonian, theta, mode, rng)


def build_tfim(num_qubits: int, num_blocks: int) -> TfimTask:
    return TfimTask(num_qubits, num_blocks)
