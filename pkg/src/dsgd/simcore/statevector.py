"""State vectors, gate application, exact expectations, and finite-shot sampling."""
from __future__ import annotations

from collections.abc import Sequence
from functools import lru_cache

import numpy as np

from . import kernels
from .gates import Gate
from .pauli import PauliObservable, PauliString, validate_grouping

MAX_QUBITS = 24


class StateVector:
    """Normalized amplitudes of an ``num_qubits``-qubit pure state (qubit 0 least significant)."""

    def __init__(self, amplitudes, *, check: bool = True):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        dim = amps.shape[0]
        if dim < 2 or dim & (dim - 1):
            raise ValueError(f"state length must be a power of two >= 2, got {dim}")
        n = dim.bit_length() - 1
        if n > MAX_QUBITS:
            raise ValueError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit cap")
        if check and abs(np.vdot(amps, amps).real - 1.0) > 1e-8:
            raise ValueError("state is not normalized")
        amps.setflags(write=False)
        self.amplitudes = amps
        self.num_qubits = n

    @classmethod
    def zero(cls, num_qubits: int) -> StateVector:
        return cls.basis(num_qubits, 0)

    @classmethod
    def basis(cls, num_qubits: int, index: int) -> StateVector:
        if not 1 <= num_qubits <= MAX_QUBITS:
            raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}]")
        amps = np.zeros(1 << num_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @classmethod
    def product(cls, single_qubit_states: Sequence) -> StateVector:
        """Tensor product; entry ``q`` of the sequence is the state of qubit ``q``."""
        out = np.ones(1, dtype=complex)
        for s in single_qubit_states:
            out = np.kron(np.asarray(s, dtype=complex), out)
        return cls(out)

    def __len__(self):
        return self.amplitudes.shape[0]

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits})"

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def _check_targets(targets, n: int) -> None:
    for t in targets:
        if not 0 <= t < n:
            raise ValueError(f"target qubit {t} out of range for {n} qubits")


def apply_gate(state: StateVector, gate: Gate, theta: float | None = None) -> StateVector:
    n = state.num_qubits
    _check_targets(gate.targets, n)
    rows = state.amplitudes[None, :]
    if gate.kind == "rotation":
        if theta is None:
            raise ValueError(f"rotation gate {gate.name} needs theta")
        out = kernels.apply_rotation(rows, gate, float(theta), n)
    else:
        if theta is not None:
            raise ValueError(f"fixed gate {gate.name} takes no theta")
        out = kernels.apply_fixed(rows, gate, n)
    return StateVector(out[0], check=False)


def _check_observable(obs: PauliObservable, n: int) -> None:
    if obs.max_qubit() >= n:
        raise ValueError(f"observable acts on qubit {obs.max_qubit()} but state has {n} qubits")


def expectation(state: StateVector, obs: PauliObservable | PauliString) -> float:
    """Exact ``<psi|O|psi>``."""
    if isinstance(obs, PauliString):
        obs = PauliObservable.single(obs)
    n = state.num_qubits
    _check_observable(obs, n)
    if len(obs) == 0:
        return 0.0
    vals = kernels.term_expectations(state.amplitudes[None, :], obs.paulis, n)[0]
    return float(vals @ obs.coeffs)


# -- sampling -------------------------------------------------------------------------


def sample_from_expectation(expvals, shots: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """n-shot means of a +/-1-valued Pauli measurement with the given exact expectations.

    The eigenvalue of a single shot is +1 with Born probability ``(1 + <P>)/2``,
    so the count of +1 outcomes is binomial.
    """
    if shots < 1:
        raise ValueError("shot count must be at least 1")
    p = np.clip((1.0 + np.asarray(expvals, dtype=float)) / 2.0, 0.0, 1.0)
    if size is not None:
        size = (size,) + p.shape if np.isscalar(size) else tuple(size) + p.shape
    plus = rng.binomial(shots, p, size=size)
    return 2.0 * plus / shots - 1.0


@lru_cache(maxsize=1024)
def _group_outcome_table(paulis: tuple[PauliString, ...], n: int) -> tuple[np.ndarray, np.ndarray]:
    """One-hot map from basis outcomes to eigenvalue-pattern classes, and each class's pattern."""
    patterns = np.zeros(1 << n, dtype=np.int64)
    for t, p in enumerate(paulis):
        parity = (kernels.parity_signs(n, p.support_mask) < 0).astype(np.int64)
        patterns |= parity << t
    uniq, labels = np.unique(patterns, return_inverse=True)
    onehot = np.zeros((1 << n, uniq.shape[0]))
    onehot[np.arange(1 << n), labels] = 1.0
    signs = 1.0 - 2.0 * ((uniq[:, None] >> np.arange(len(paulis))[None, :]) & 1)
    return onehot, signs


def sample_group_rows(states: np.ndarray, paulis: Sequence[PauliString], shots: int,
                      rng: np.random.Generator, n: int, size=None) -> np.ndarray:
    """Joint n-shot means of qubit-wise commuting ``paulis`` on each row of ``states``.

    Each row is rotated into the shared eigenbasis; ``shots`` computational-basis
    outcomes are drawn and every term's eigenvalue is read off the same outcomes.
    Returns shape ``(*size, B, len(paulis))``.
    """
    if shots < 1:
        raise ValueError("shot count must be at least 1")
    basis: dict[int, str] = {}
    for p in paulis:
        for q, s in p.ops:
            if basis.setdefault(q, s) != s:
                raise ValueError("terms measured together must be qubit-wise commuting")
    rotated = kernels.rotate_to_measurement_basis(states, basis, n)
    probs = np.abs(rotated) ** 2
    onehot, signs = _group_outcome_table(tuple(paulis), n)
    class_probs = probs @ onehot
    class_probs /= class_probs.sum(axis=1, keepdims=True)
    if size is not None:
        size = (size,) if np.isscalar(size) else tuple(size)
        counts = rng.multinomial(shots, class_probs, size=size + class_probs.shape[:1])
    else:
        counts = rng.multinomial(shots, class_probs)
    return counts @ signs / shots


def sample_term(state: StateVector, pauli: PauliString, n: int, rng: np.random.Generator) -> float:
    """Mean of ``n`` single-shot eigenvalue readouts of ``pauli`` on ``state``."""
    if n < 1:
        raise ValueError("shot count must be at least 1")
    _check_observable(PauliObservable.single(pauli), state.num_qubits)
    out = sample_group_rows(state.amplitudes[None, :], [pauli], n, rng, state.num_qubits)
    return float(out[0, 0])


def sample_observable(state: StateVector, obs: PauliObservable, n: int, rng: np.random.Generator,
                      grouping: Sequence[Sequence[int]] | None = None) -> float:
    """``sum_j c_j * (n-shot mean of P_j)``.

    Without ``grouping`` every term gets its own ``n`` measurement contexts; terms
    inside one group share the same ``n`` simulated readouts.
    """
    if n < 1:
        raise ValueError("shot count must be at least 1")
    nq = state.num_qubits
    _check_observable(obs, nq)
    groups = [[j] for j in range(len(obs))] if grouping is None else validate_grouping(obs, grouping)
    coeffs = obs.coeffs
    rows = state.amplitudes[None, :]
    total = 0.0
    for g in groups:
        means = sample_group_rows(rows, [obs.terms[j][1] for j in g], n, rng, nq)[0]
        total += float(means @ coeffs[g])
    return total
