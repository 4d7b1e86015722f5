"""MaxCut as a QAOA problem: graph sampling, Hamiltonians and the normalized cost."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from math import comb

import numpy as np

from ..circuits import ParamCircuit, build_qaoa_ansatz
from ..gradients import ShiftRule, derive_shift_rule
from ..rng import RngStream, as_stream
from ..simcore.pauli import PauliObservable
from .common import diagonal_energies, observable_loss


def _check_edges(edges, num_vertices: int | None = None) -> tuple[tuple[int, int], ...]:
    out = []
    seen = set()
    for a, b in edges:
        a, b = int(a), int(b)
        if a == b:
            raise ValueError(f"self-loop on vertex {a}")
        if a < 0 or b < 0:
            raise ValueError("vertex indices must be non-negative")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise ValueError(f"duplicate edge {key}")
        seen.add(key)
        out.append(key)
    if not out:
        raise ValueError("graph has no edges")
    if num_vertices is not None and max(max(e) for e in out) >= num_vertices:
        raise ValueError("edge refers to a vertex outside the graph")
    return tuple(out)


def maxcut_hamiltonian(edges) -> PauliObservable:
    """``sum_{(i,j) in E} Z_i Z_j``; its minimum is ``|E| - 2 * maxcut``."""
    return PauliObservable([(1.0, f"Z{a} Z{b}") for a, b in _check_edges(edges)])


def transverse_mixer(num_qubits: int) -> PauliObservable:
    return PauliObservable([(1.0, f"X{j}") for j in range(num_qubits)])


def random_maxcut_instance(num_vertices: int, num_edges: int, rng: RngStream | int) -> list[tuple[int, int]]:
    """A uniformly random simple graph with exactly ``num_edges`` edges."""
    pairs = list(combinations(range(num_vertices), 2))
    if not 0 < num_edges <= len(pairs):
        raise ValueError(f"cannot place {num_edges} edges on {num_vertices} vertices (max {comb(num_vertices, 2)})")
    pick = as_stream(rng).generator().choice(len(pairs), size=num_edges, replace=False)
    return sorted(pairs[i] for i in pick)


def linear_interpolation_init(num_params: int) -> np.ndarray:
    """With 1-based ``j``: ``theta_j = j/d`` for odd ``j`` (problem), ``1 - j/d`` for even ``j`` (mixer)."""
    j = np.arange(1, num_params + 1)
    return np.where(j % 2 == 1, j / num_params, 1.0 - j / num_params)


@dataclass(eq=False)
class MaxCutTask:
    edges: tuple[tuple[int, int], ...]
    depth: int
    num_vertices: int | None = None
    problem: PauliObservable = field(init=False)
    mixer: PauliObservable = field(init=False)
    circuit: ParamCircuit = field(init=False)

    kind = "maxcut"

    def __post_init__(self):
        self.edges = _check_edges(self.edges, self.num_vertices)
        if self.num_vertices is None:
            self.num_vertices = max(max(e) for e in self.edges) + 1
        if self.depth < 2 or self.depth % 2:
            raise ValueError("depth counts parameter slots and must be a positive even number")
        self.problem = maxcut_hamiltonian(self.edges)
        self.mixer = transverse_mixer(self.num_vertices)
        self.circuit = build_qaoa_ansatz(self.problem, self.mixer, self.depth // 2, num_qubits=self.num_vertices)

    @property
    def hamiltonian(self) -> PauliObservable:
        return self.problem

    @property
    def num_qubits(self) -> int:
        return self.num_vertices

    @property
    def num_params(self) -> int:
        return self.circuit.num_params

    @cached_property
    def rule(self) -> ShiftRule:
        return derive_shift_rule(self.circuit)

    @cached_property
    def ground_energy(self) -> float:
        return float(diagonal_energies(self.problem, self.num_vertices).min())

    @property
    def max_cut(self) -> int:
        return int(round((len(self.edges) - self.ground_energy) / 2))

    def initial_theta(self, rng=None) -> np.ndarray:
        return linear_interpolation_init(self.num_params)

    def loss(self, theta) -> float:
        return observable_loss(self.circuit, self.problem, theta)

    def evaluate_loss(self, theta, mode="exact", rng=None) -> float:
        return observable_loss(self.circuit, self.problem, theta, mode, rng)

    def normalize(self, energy):
        """Energy over ``|E_ground|``, shifted by +1: zero exactly at the ground energy."""
        return np.asarray(energy) / abs(self.ground_energy) + 1.0

    def normalized_cost(self, theta) -> float:
        return float(self.normalize(self.loss(theta)))


def build_maxcut(edges, depth: int, num_vertices: int | None = None) -> MaxCutTask:
    return MaxCutTask(tuple(edges), depth, num_vertices)
