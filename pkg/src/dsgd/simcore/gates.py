"""Gate descriptions: fixed unitaries and parameterized rotations exp(-i theta G)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pauli import PauliString

_SQ2 = 1 / np.sqrt(2)

FIXED_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
    # first target is the most-significant bit of the local matrix index
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}

# rotation names with the half-angle convention R_P(theta) = exp(-i theta P / 2)
_HALF_ANGLE = {"RX": "X", "RY": "Y", "RZ": "Z"}


def _check_unitary(matrix: np.ndarray, tol: float = 1e-10) -> None:
    d = matrix.shape[0]
    if matrix.shape != (d, d) or d & (d - 1):
        raise ValueError(f"gate matrix must be square with power-of-two size, got {matrix.shape}")
    if not np.allclose(matrix.conj().T @ matrix, np.eye(d), atol=tol):
        raise ValueError("gate matrix is not unitary")


def pauli_local_matrix(pauli: PauliString) -> np.ndarray:
    """Matrix of ``pauli`` on its own support, first support qubit most significant."""
    out = np.ones((1, 1), dtype=complex)
    for _, p in pauli.ops:
        out = np.kron(out, FIXED_MATRICES[p])
    return out


@dataclass(frozen=True, eq=False)
class Gate:
    """One circuit element.

    ``kind == "fixed"`` gates carry a unitary ``matrix`` on ``targets``.
    ``kind == "rotation"`` gates implement ``exp(-i theta G)`` where the generator
    ``G = sign * radius * P`` for a Pauli string ``P`` (or ``G`` is a Hermitian matrix
    on ``targets``); ``slot`` names the parameter the angle is read from. The
    generator spectrum is ``{-radius, +radius}`` in the Pauli case.
    """

    name: str
    targets: tuple[int, ...]
    kind: str
    matrix: np.ndarray | None = None
    generator: PauliString | np.ndarray | None = None
    radius: float | None = None
    slot: int | None = None
    angle: float | None = None
    sign: int = 1
    _eig: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("fixed", "rotation"):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"repeated target in {self.targets}")
        if any(t < 0 for t in self.targets):
            raise ValueError("negative target index")
        if self.kind == "fixed":
            if self.matrix is None:
                raise ValueError("fixed gate needs a matrix")
            if self.matrix.shape[0] != 1 << len(self.targets):
                raise ValueError("matrix size does not match number of targets")
            _check_unitary(self.matrix)
        else:
            if self.slot is None or self.slot < 0:
                raise ValueError("rotation gate needs a non-negative parameter slot")
            if not self.radius or self.radius <= 0:
                raise ValueError("rotation radius must be positive")

    # -- constructors -----------------------------------------------------------------

    @classmethod
    def fixed(cls, name: str, targets, matrix: np.ndarray | None = None, angle: float | None = None) -> Gate:
        targets = tuple(int(t) for t in targets)
        if matrix is None:
            if name not in FIXED_MATRICES:
                raise ValueError(f"no built-in matrix for gate {name!r}")
            matrix = FIXED_MATRICES[name]
        return cls(name=name, targets=targets, kind="fixed", matrix=np.asarray(matrix, dtype=complex), angle=angle)

    @classmethod
    def rotation(cls, generator: PauliString | str, slot: int, coeff: float = 0.5, name: str | None = None) -> Gate:
        """``exp(-i theta * coeff * P)``; the default gives R_P(theta) = exp(-i theta P/2)."""
        pauli = generator if isinstance(generator, PauliString) else PauliString(generator)
        if len(pauli) == 0:
            raise ValueError("rotation generator must act on at least one qubit")
        if name is None:
            letters = "".join(p for _, p in pauli.ops)
            name = f"R{letters}" if coeff == 0.5 else f"EXP_{letters}"
        return cls(name=name, targets=pauli.qubits, kind="rotation", generator=pauli,
                   radius=abs(float(coeff)), slot=int(slot), sign=-1 if coeff < 0 else 1)

    @classmethod
    def hermitian_rotation(cls, matrix: np.ndarray, targets, slot: int, name: str = "EXP_H") -> Gate:
        """``exp(-i theta G)`` for a Hermitian matrix ``G`` on ``targets``."""
        matrix = np.asarray(matrix, dtype=complex)
        if not np.allclose(matrix, matrix.conj().T, atol=1e-12):
            raise ValueError("generator is not Hermitian")
        evals, evecs = np.linalg.eigh(matrix)
        radius = float(np.max(np.abs(evals)))
        targets = tuple(int(t) for t in targets)
        if matrix.shape[0] != 1 << len(targets):
            raise ValueError("generator size does not match number of targets")
        return cls(name=name, targets=targets, kind="rotation", generator=matrix,
                   radius=radius if radius > 0 else 1.0, slot=int(slot), _eig=(evals, evecs))

    @classmethod
    def fixed_rotation(cls, generator: PauliString | str, angle: float, coeff: float = 0.5) -> Gate:
        """A Pauli rotation frozen at ``angle``; stored as a fixed unitary."""
        rot = cls.rotation(generator, slot=0, coeff=coeff)
        return cls.fixed(rot.name, rot.targets, rot.unitary(angle), angle=float(angle))

    # -- queries ----------------------------------------------------------------------

    @property
    def is_pauli_rotation(self) -> bool:
        return self.kind == "rotation" and isinstance(self.generator, PauliString)

    def generator_spectrum(self) -> np.ndarray:
        if self.is_pauli_rotation:
            return np.array([-self.radius, self.radius])
        return np.unique(np.round(self._eig[0], 12))

    @property
    def coeff(self) -> float:
        """Signed scale of the Pauli generator."""
        return self.sign * self.radius

    def generator_norm(self) -> float:
        """Spectral norm of the generator (equal to the radius for Pauli generators)."""
        return float(self.radius)

    def unitary(self, theta: float | None = None) -> np.ndarray:
        """Dense matrix on ``targets`` (first target most significant)."""
        if self.kind == "fixed":
            return self.matrix
        if theta is None:
            raise ValueError(f"rotation gate {self.name} needs an angle")
        if self.is_pauli_rotation:
            a = self.coeff * theta
            local = pauli_local_matrix(self.generator)
            return np.cos(a) * np.eye(local.shape[0]) - 1j * np.sin(a) * local
        evals, evecs = self._eig
        return (evecs * np.exp(-1j * theta * evals)) @ evecs.conj().T

    def with_slot(self, slot: int) -> Gate:
        if self.kind != "rotation":
            raise ValueError("only rotation gates have slots")
        return Gate(self.name, self.targets, self.kind, self.matrix, self.generator,
                    self.radius, int(slot), None, self.sign, self._eig)


def rx(qubit: int, slot: int) -> Gate:
    return Gate.rotation(PauliString({qubit: "X"}), slot)


def ry(qubit: int, slot: int) -> Gate:
    return Gate.rotation(PauliString({qubit: "Y"}), slot)


def rz(qubit: int, slot: int) -> Gate:
    return Gate.rotation(PauliString({qubit: "Z"}), slot)


def cnot(control: int, target: int) -> Gate:
    return Gate.fixed("CNOT", (control, target))


def half_angle_pauli(name: str) -> str | None:
    return _HALF_ANGLE.get(name)
