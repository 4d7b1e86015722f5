"""Batched dense-statevector kernels.

States are ``(B, 2**n)`` complex arrays, one row per state, indexed by bitstring
with qubit 0 as the least-significant bit.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .gates import FIXED_MATRICES, Gate
from .pauli import PauliString


@lru_cache(maxsize=4096)
def _pauli_action(n: int, x_mask: int, z_mask: int, num_y: int) -> tuple[np.ndarray, np.ndarray]:
    # (P psi)[c] = i^{nY} (-1)^{popcount((c ^ x) & z)} psi[c ^ x]
    idx = np.arange(1 << n, dtype=np.int64) ^ x_mask
    parity = np.bitwise_count(idx & z_mask) & 1
    phase = (1j ** num_y) * (1 - 2 * parity.astype(float))
    idx.setflags(write=False)
    phase.setflags(write=False)
    return idx, phase


def pauli_action(n: int, pauli: PauliString) -> tuple[np.ndarray, np.ndarray]:
    return _pauli_action(n, pauli.x_mask, pauli.z_mask, pauli.num_y)


@lru_cache(maxsize=4096)
def parity_signs(n: int, mask: int) -> np.ndarray:
    """``(-1)^{popcount(b & mask)}`` for every basis index ``b``."""
    b = np.arange(1 << n, dtype=np.int64)
    out = 1.0 - 2.0 * (np.bitwise_count(b & mask) & 1)
    out.setflags(write=False)
    return out


def apply_pauli(states: np.ndarray, pauli: PauliString, n: int) -> np.ndarray:
    idx, phase = pauli_action(n, pauli)
    return states[..., idx] * phase


def apply_pauli_rotation(states: np.ndarray, pauli: PauliString, half: np.ndarray | float, n: int) -> np.ndarray:
    """exp(-i a P) applied row-wise, ``a`` broadcast against the batch axis."""
    a = np.asarray(half, dtype=float)
    c = np.cos(a)[..., None] if a.ndim else np.cos(a)
    s = np.sin(a)[..., None] if a.ndim else np.sin(a)
    if pauli.is_diagonal:
        signs = parity_signs(n, pauli.z_mask)
        return states * (c - 1j * s * signs)
    return c * states - 1j * s * apply_pauli(states, pauli, n)


def apply_diagonal_rotations(states: np.ndarray, masks: np.ndarray, half: np.ndarray, n: int) -> np.ndarray:
    """Fused product of commuting diagonal rotations exp(-i a_g Z_g), ``half`` of shape (B, G)."""
    signs = np.stack([parity_signs(n, int(m)) for m in masks])
    phase = np.exp(-1j * (np.atleast_2d(half) @ signs))
    return states * phase


@lru_cache(maxsize=1024)
def _permutation(n: int, name: str, targets: tuple[int, ...]) -> np.ndarray | None:
    b = np.arange(1 << n, dtype=np.int64)
    if name == "CNOT":
        c, t = targets
        return b ^ (((b >> c) & 1) << t)
    if name == "X":
        return b ^ (1 << targets[0])
    if name == "SWAP":
        i, j = targets
        diff = ((b >> i) & 1) ^ ((b >> j) & 1)
        return b ^ ((diff << i) | (diff << j))
    return None


def apply_matrix(states: np.ndarray, matrix: np.ndarray, targets: tuple[int, ...], n: int) -> np.ndarray:
    """Apply a ``2^k x 2^k`` (or batched ``(B, 2^k, 2^k)``) matrix to ``targets``."""
    k = len(targets)
    batch = states.shape[0]
    tensor = states.reshape((batch,) + (2,) * n)
    # axis 1 + (n-1-q) holds qubit q
    axes = [1 + (n - 1 - q) for q in targets]
    moved = np.moveaxis(tensor, axes, list(range(n + 1 - k, n + 1)))
    shape = moved.shape
    flat = moved.reshape(batch, -1, 1 << k)
    if matrix.ndim == 2:
        out = flat @ matrix.T
    else:
        out = np.einsum("bij,bmj->bmi", matrix, flat)
    out = np.moveaxis(out.reshape(shape), list(range(n + 1 - k, n + 1)), axes)
    return out.reshape(batch, 1 << n)


def apply_fixed(states: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    if gate.name in ("CNOT", "X", "SWAP") and gate.matrix is FIXED_MATRICES.get(gate.name):
        return states[:, _permutation(n, gate.name, gate.targets)]
    return apply_matrix(states, gate.matrix, gate.targets, n)


def apply_rotation(states: np.ndarray, gate: Gate, theta: np.ndarray | float, n: int) -> np.ndarray:
    if gate.is_pauli_rotation:
        return apply_pauli_rotation(states, gate.generator, gate.coeff * np.asarray(theta, dtype=float), n)
    evals, evecs = gate._eig
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0:
        return apply_matrix(states, gate.unitary(float(theta)), gate.targets, n)
    mats = np.einsum("ij,bj,kj->bik", evecs, np.exp(-1j * theta[:, None] * evals), evecs.conj())
    return apply_matrix(states, mats, gate.targets, n)


def term_expectations(states: np.ndarray, paulis, n: int) -> np.ndarray:
    """Exact ``<psi|P_j|psi>`` for every row and term, shape ``(B, M)``."""
    paulis = list(paulis)
    out = np.empty((states.shape[0], len(paulis)))
    probs = None
    for j, p in enumerate(paulis):
        if p.is_diagonal:
            if probs is None:
                probs = np.abs(states) ** 2
            out[:, j] = probs @ parity_signs(n, p.z_mask)
        else:
            out[:, j] = np.einsum("bi,bi->b", states.conj(), apply_pauli(states, p, n)).real
    return out


_BASIS_CHANGE = {
    "X": FIXED_MATRICES["H"],
    "Y": FIXED_MATRICES["H"] @ FIXED_MATRICES["SDG"],
}


def rotate_to_measurement_basis(states: np.ndarray, basis: dict[int, str], n: int) -> np.ndarray:
    """Map the joint eigenbasis of the qubit-wise Paulis in ``basis`` to the computational basis."""
    for q, p in sorted(basis.items()):
        if p != "Z":
            states = apply_matrix(states, _BASIS_CHANGE[p], (q,), n)
    return states
