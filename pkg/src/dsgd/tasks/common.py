"""Ground energies and shared loss evaluation for the benchmark tasks."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from ..circuits import ParamCircuit
from ..gradients import observable_rows
from ..rng import RngStream, as_stream
from ..simcore import kernels
from ..simcore.pauli import PauliObservable
from ..simcore.statevector import sample_from_expectation

DENSE_LIMIT = 12


def diagonal_energies(H: PauliObservable, num_qubits: int) -> np.ndarray:
    """All eigenvalues of a diagonal Pauli sum, indexed by basis state."""
    if not H.is_diagonal:
        raise ValueError("Hamiltonian is not diagonal")
    out = np.zeros(1 << num_qubits)
    for c, p in H.terms:
        out += c * kernels.parity_signs(num_qubits, p.z_mask)
    return out


def sparse_matrix(H: PauliObservable, num_qubits: int) -> sp.csr_matrix:
    dim = 1 << num_qubits
    out = sp.csr_matrix((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for c, p in H.terms:
        # (P psi)[r] = phase[r] psi[idx[r]]
        idx, phase = kernels.pauli_action(num_qubits, p)
        out = out + sp.csr_matrix((c * phase, (cols, idx)), shape=(dim, dim))
    return out


def ground_energy(H: PauliObservable, num_qubits: int) -> float:
    """Smallest eigenvalue: enumeration for diagonal H, dense up to 12 qubits, Lanczos beyond."""
    if H.is_diagonal:
        return float(diagonal_energies(H, num_qubits).min())
    if num_qubits <= DENSE_LIMIT:
        return float(np.linalg.eigvalsh(H.to_matrix(num_qubits))[0])
    return float(eigsh(sparse_matrix(H, num_qubits), k=1, which="SA")[0][0])


def observable_loss(circuit: ParamCircuit, H: PauliObservable, theta, mode="exact",
                    rng: RngStream | int | None = None) -> float:
    """``<H>`` at ``theta``; ``mode`` is ``"exact"`` or a shot count (one n-shot context per term)."""
    states = circuit.states(theta)
    if mode == "exact":
        return float(observable_rows(states, H, circuit.num_qubits)[0])
    if isinstance(mode, (bool, np.bool_)) or not isinstance(mode, (int, np.integer)) or mode < 1:
        raise ValueError(f"mode must be 'exact' or a positive shot count, got {mode!r}")
    if rng is None:
        raise ValueError("shot-based evaluation needs an rng")
    ev = kernels.term_expectations(states, H.paulis, circuit.num_qubits)[0]
    means = sample_from_expectation(ev, int(mode), as_stream(rng).generator())
    return float(means @ H.coeffs)
