"""Parameter-shift rules, exact gradients, a finite-difference oracle, and the Lipschitz bound."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import ParamCircuit
from .simcore import kernels
from .simcore.pauli import PauliObservable

FD_STEP = 1e-5


@dataclass(frozen=True)
class ShiftTerm:
    gamma: float
    shift: float
    gate: int  # position in circuit.param_gates


class ShiftRule:
    """Per-slot lists of ``(gamma, shift, gate)`` entries.

    The derivative with respect to slot ``i`` is ``sum_k gamma_k <O>`` evaluated
    with only gate ``gate_k`` shifted by ``shift_k``. A slot bound to M gates has
    2M entries, one two-term rule per gate.
    """

    def __init__(self, entries: list[list[ShiftTerm]]):
        self.entries = tuple(tuple(e) for e in entries)
        flat = [(i, t) for i, terms in enumerate(self.entries) for t in terms]
        self.flat_slot = np.array([i for i, _ in flat], dtype=np.int64)
        self.flat_gate = np.array([t.gate for _, t in flat], dtype=np.int64)
        self.flat_gamma = np.array([t.gamma for _, t in flat], dtype=float)
        self.flat_shift = np.array([t.shift for _, t in flat], dtype=float)
        self.offsets = np.concatenate([[0], np.cumsum([len(e) for e in self.entries])]).astype(np.int64)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, slot: int) -> tuple[ShiftTerm, ...]:
        return self.entries[slot]

    @property
    def num_terms(self) -> np.ndarray:
        """K_i for every slot."""
        return np.diff(self.offsets)

    def shifted_angles(self, base_angles: np.ndarray, which: np.ndarray | None = None) -> np.ndarray:
        """Gate-angle rows for the flat entries ``which`` (default all), each shifting one gate."""
        idx = np.arange(self.flat_gate.shape[0]) if which is None else np.asarray(which)
        rows = np.repeat(np.asarray(base_angles, dtype=float)[None, :], idx.shape[0], axis=0)
        rows[np.arange(idx.shape[0]), self.flat_gate[idx]] += self.flat_shift[idx]
        return rows


def _two_point_radius(gate) -> float:
    spectrum = np.sort(gate.generator_spectrum())
    if spectrum.shape[0] != 2 or spectrum[1] <= 0 or not np.isclose(spectrum[0], -spectrum[1]):
        raise ValueError(f"gate {gate.name} does not have a two-eigenvalue +/-r generator spectrum")
    return float(spectrum[1])


def derive_shift_rule(circuit: ParamCircuit) -> ShiftRule:
    """Two-term rule (+r, +pi/(4r)), (-r, -pi/(4r)) for every gate, grouped by slot."""
    entries: list[list[ShiftTerm]] = [[] for _ in range(circuit.num_params)]
    for p, gi in enumerate(circuit.param_gates):
        gate = circuit.gates[gi]
        r = _two_point_radius(gate)
        c = np.pi / (4 * r)
        entries[gate.slot] += [ShiftTerm(r, c, p), ShiftTerm(-r, -c, p)]
    return ShiftRule(entries)


def _rule(circuit: ParamCircuit, rule: ShiftRule | None) -> ShiftRule:
    return derive_shift_rule(circuit) if rule is None else rule


def observable_rows(states: np.ndarray, obs: PauliObservable, n: int) -> np.ndarray:
    """Exact ``<O>`` for every row of a state batch."""
    if len(obs) == 0:
        return np.zeros(states.shape[0])
    return kernels.term_expectations(states, obs.paulis, n) @ obs.coeffs


def expectation_value(circuit: ParamCircuit, obs: PauliObservable, theta, initial=None) -> float:
    return float(observable_rows(circuit.states(theta, initial), obs, circuit.num_qubits)[0])


def exact_partial(circuit: ParamCircuit, obs: PauliObservable, theta, slot: int, initial=None,
                  rule: ShiftRule | None = None) -> float:
    """``sum_k gamma_{k,i} <O>`` at the gate-shifted parameters of slot ``i``."""
    theta = circuit.check_theta(theta)
    if not 0 <= slot < circuit.num_params:
        raise IndexError(f"slot {slot} out of range for {circuit.num_params} parameters")
    rule = _rule(circuit, rule)
    which = np.arange(rule.offsets[slot], rule.offsets[slot + 1])
    states = circuit.shifted_states(circuit.gate_angles(theta), rule.flat_gate[which], rule.flat_shift[which],
                                    initial)[0, 1:]
    vals = observable_rows(states, obs, circuit.num_qubits)
    return float(rule.flat_gamma[which] @ vals)


def exact_gradient(circuit: ParamCircuit, obs: PauliObservable, theta, initial=None,
                   rule: ShiftRule | None = None) -> np.ndarray:
    """All partial derivatives by the parameter-shift rule, using exact expectations."""
    theta = circuit.check_theta(theta)
    rule = _rule(circuit, rule)
    if circuit.num_params == 0:
        return np.zeros(0)
    states = circuit.shifted_states(circuit.gate_angles(theta), rule.flat_gate, rule.flat_shift, initial)[0, 1:]
    vals = observable_rows(states, obs, circuit.num_qubits)
    return np.bincount(rule.flat_slot, weights=rule.flat_gamma * vals, minlength=circuit.num_params)


def finite_difference_gradient(circuit: ParamCircuit, obs: PauliObservable, theta, h: float = FD_STEP,
                               initial=None) -> np.ndarray:
    """Central differences ``(f(theta + h e_i) - f(theta - h e_i)) / 2h`` on every slot."""
    theta = circuit.check_theta(theta)
    d = circuit.num_params
    eye = np.eye(d)
    thetas = np.concatenate([theta + h * eye, theta - h * eye])
    vals = observable_rows(circuit.states(thetas, initial), obs, circuit.num_qubits)
    return (vals[:d] - vals[d:]) / (2 * h)


@dataclass(frozen=True)
class LipschitzBound:
    """``value = 2 sqrt(d) max_i ||O|| ||H_i||`` and the per-slot bounds ``2 ||O|| ||H_i||``."""

    value: float
    per_slot: np.ndarray


def slot_generator_norms(circuit: ParamCircuit) -> np.ndarray:
    """Upper bound on the norm of each slot's total generator (sum of its gates' radii)."""
    norms = np.zeros(circuit.num_params)
    for gi in circuit.param_gates:
        gate = circuit.gates[gi]
        norms[gate.slot] += gate.generator_norm()
    return norms


def lipschitz_bound(circuit: ParamCircuit, obs: PauliObservable) -> LipschitzBound:
    """Gradient-norm bound from the commutator form of the partial derivatives."""
    per_slot = 2.0 * obs.norm_bound() * slot_generator_norms(circuit)
    if per_slot.size == 0:
        return LipschitzBound(0.0, per_slot)
    return LipschitzBound(float(np.sqrt(per_slot.size) * per_slot.max()), per_slot)
