"""Pauli strings, weighted Pauli sums, and qubit-wise commuting groups."""
from __future__ import annotations

import math
import re
from collections.abc import Iterable, Mapping
from functools import cached_property

import numpy as np

_PAULI_CHARS = frozenset("XYZ")
_TOKEN = re.compile(r"^([XYZ])(\d+)$")

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class PauliString:
    """Tensor product of single-qubit Paulis, stored as a sorted ``qubit -> 'X'|'Y'|'Z'`` map.

    Qubits not mentioned carry the identity. Accepts a mapping, an iterable of
    ``(qubit, pauli)`` pairs, or a compact string such as ``"Z0 Z1"``.
    """

    def __init__(self, ops: Mapping[int, str] | Iterable[tuple[int, str]] | str = ()):
        if isinstance(ops, str):
            pairs = []
            for token in ops.split():
                m = _TOKEN.match(token)
                if m is None:
                    raise ValueError(f"bad Pauli token {token!r}")
                pairs.append((int(m.group(2)), m.group(1)))
        elif isinstance(ops, Mapping):
            pairs = list(ops.items())
        else:
            pairs = list(ops)
        seen = {}
        for q, p in pairs:
            q = int(q)
            if q < 0:
                raise ValueError(f"negative qubit index {q}")
            if p not in _PAULI_CHARS:
                raise ValueError(f"unknown Pauli {p!r}")
            if q in seen:
                raise ValueError(f"qubit {q} appears twice")
            seen[q] = p
        self.ops: tuple[tuple[int, str], ...] = tuple(sorted(seen.items()))

    def __eq__(self, other):
        return isinstance(other, PauliString) and self.ops == other.ops

    def __hash__(self):
        return hash(self.ops)

    def __repr__(self):
        return f"PauliString({str(self)!r})"

    def __str__(self):
        return " ".join(f"{p}{q}" for q, p in self.ops) or "I"

    def __len__(self):
        return len(self.ops)

    def as_dict(self) -> dict[int, str]:
        return dict(self.ops)

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.ops)

    @cached_property
    def x_mask(self) -> int:
        """Bits flipped by the string (X or Y positions)."""
        return sum(1 << q for q, p in self.ops if p in "XY")

    @cached_property
    def z_mask(self) -> int:
        """Bits picking up a phase (Z or Y positions)."""
        return sum(1 << q for q, p in self.ops if p in "YZ")

    @cached_property
    def support_mask(self) -> int:
        return sum(1 << q for q, _ in self.ops)

    @property
    def num_y(self) -> int:
        return sum(1 for _, p in self.ops if p == "Y")

    @property
    def is_diagonal(self) -> bool:
        return self.x_mask == 0

    def max_qubit(self) -> int:
        return self.ops[-1][0] if self.ops else -1

    def qubitwise_commutes(self, other: PauliString) -> bool:
        """True when the two strings agree or one is the identity on every qubit."""
        mine = dict(self.ops)
        return all(mine.get(q, p) == p for q, p in other.ops)

    def commutes(self, other: PauliString) -> bool:
        anti = 0
        mine = dict(self.ops)
        for q, p in other.ops:
            if q in mine and mine[q] != p:
                anti += 1
        return anti % 2 == 0

    def to_matrix(self, num_qubits: int) -> np.ndarray:
        """Dense matrix in the little-endian basis (qubit 0 is the least-significant bit)."""
        if self.max_qubit() >= num_qubits:
            raise ValueError(f"{self} does not fit on {num_qubits} qubits")
        mine = dict(self.ops)
        out = np.ones((1, 1), dtype=complex)
        for q in reversed(range(num_qubits)):
            out = np.kron(out, _SINGLE[mine.get(q, "I")])
        return out


class PauliObservable:
    """Real-weighted sum of Pauli strings, ``O = sum_j c_j P_j``.

    Duplicate strings are merged on construction, first occurrence fixing the
    order. Zero-weight terms are kept so the term count stays as given.
    """

    def __init__(self, terms: Iterable[tuple[float, PauliString | str | Mapping[int, str]]] = ()):
        merged: dict[PauliString, float] = {}
        for coeff, pauli in terms:
            if not isinstance(pauli, PauliString):
                pauli = PauliString(pauli)
            if isinstance(coeff, complex):
                if coeff.imag != 0:
                    raise ValueError("observable coefficients must be real")
                coeff = coeff.real
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise ValueError(f"non-finite coefficient {coeff}")
            merged[pauli] = merged.get(pauli, 0.0) + coeff
        self.terms: tuple[tuple[float, PauliString], ...] = tuple((c, p) for p, c in merged.items())

    @classmethod
    def single(cls, pauli: PauliString | str, coeff: float = 1.0) -> PauliObservable:
        return cls([(coeff, pauli)])

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __repr__(self):
        body = " + ".join(f"{c:g}*{p}" for c, p in self.terms) or "0"
        return f"PauliObservable({body})"

    def __add__(self, other: PauliObservable) -> PauliObservable:
        return PauliObservable(self.terms + other.terms)

    def __mul__(self, scalar: float) -> PauliObservable:
        return PauliObservable([(scalar * c, p) for c, p in self.terms])

    __rmul__ = __mul__

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=float)

    @property
    def paulis(self) -> tuple[PauliString, ...]:
        return tuple(p for _, p in self.terms)

    def norm_bound(self) -> float:
        """Upper bound on the spectral norm: sum of absolute weights."""
        return float(sum(abs(c) for c, _ in self.terms))

    def max_qubit(self) -> int:
        return max((p.max_qubit() for _, p in self.terms), default=-1)

    @property
    def is_diagonal(self) -> bool:
        return all(p.is_diagonal for _, p in self.terms)

    def mutually_commuting(self) -> bool:
        ps = self.paulis
        return all(a.commutes(b) for i, a in enumerate(ps) for b in ps[i + 1:])

    def to_matrix(self, num_qubits: int) -> np.ndarray:
        dim = 1 << num_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for c, p in self.terms:
            out += c * p.to_matrix(num_qubits)
        return out


def is_qubitwise_commuting(paulis: Iterable[PauliString]) -> bool:
    ps = list(paulis)
    return all(a.qubitwise_commutes(b) for i, a in enumerate(ps) for b in ps[i + 1:])


def group_qubitwise_commuting(obs: PauliObservable) -> list[list[int]]:
    """Greedy first-fit partition of term indices into qubit-wise commuting groups."""
    groups: list[list[int]] = []
    bases: list[dict[int, str]] = []
    for idx, (_, pauli) in enumerate(obs.terms):
        for group, basis in zip(groups, bases):
            if all(basis.get(q, p) == p for q, p in pauli.ops):
                group.append(idx)
                basis.update(pauli.ops)
                break
        else:
            groups.append([idx])
            bases.append(dict(pauli.ops))
    return groups


def validate_grouping(obs: PauliObservable, groups: Iterable[Iterable[int]]) -> list[list[int]]:
    groups = [list(g) for g in groups]
    flat = sorted(i for g in groups for i in g)
    if flat != list(range(len(obs))):
        raise ValueError("grouping must place every term in exactly one group")
    for g in groups:
        if not is_qubitwise_commuting(obs.terms[i][1] for i in g):
            raise ValueError(f"group {g} is not qubit-wise commuting")
    return groups
