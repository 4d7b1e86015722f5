from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import expm


def embed(local: np.ndarray, targets, n: int) -> np.ndarray:
    """Full ``2^n`` matrix of ``local`` acting on ``targets`` (first target most significant)."""
    dim = 1 << n
    k = len(targets)
    out = np.zeros((dim, dim), complex)
    for col in range(dim):
        sub = 0
        for t in targets:
            sub = (sub << 1) | ((col >> t) & 1)
        rest = col
        for t in targets:
            rest &= ~(1 << t)
        for new in range(1 << k):
            row = rest
            for pos, t in enumerate(targets):
                row |= ((new >> (k - 1 - pos)) & 1) << t
            out[row, col] += local[new, sub]
    return out


def dense_circuit_unitary(circuit, theta) -> np.ndarray:
    """Gate-by-gate product of embedded matrices and matrix exponentials."""
    n = circuit.num_qubits
    u = np.eye(1 << n, dtype=complex)
    for g in circuit.gates:
        if g.kind == "fixed":
            m = embed(g.matrix, g.targets, n)
        elif g.is_pauli_rotation:
            m = expm(-1j * theta[g.slot] * g.coeff * g.generator.to_matrix(n))
        else:
            m = embed(expm(-1j * theta[g.slot] * g.generator), g.targets, n)
        u = m @ u
    return u


def dense_energy(circuit, H, theta, initial=None) -> float:
    n = circuit.num_qubits
    psi = np.zeros(1 << n, complex)
    psi[0] = 1.0
    if initial is not None:
        psi = np.asarray(initial, complex)
    psi = dense_circuit_unitary(circuit, theta) @ psi
    return float(np.real(psi.conj() @ H.to_matrix(n) @ psi))


def central_differences(f, theta, h=1e-5) -> np.ndarray:
    theta = np.asarray(theta, float)
    out = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        out[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance report --------------------------------------------------------------------

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """``report(number, passed, detail)`` records one line for the acceptance summary."""

    def _report(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
