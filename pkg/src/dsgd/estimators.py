"""Unbiased stochastic gradient estimators.

Every estimator works from exact Born probabilities of the shifted circuits and
then draws finite-shot outcomes from them, so sampled values have exactly the
distribution of repeated hardware measurements. A ``size`` argument returns that
many independent draws at once (shape ``(size, d)``); cost fields always refer to
a single draw.

Randomness comes from named substreams of one :class:`~dsgd.rng.RngStream`:
``select`` (term, group, shift and instance choices), ``shots`` (measurement
outcomes), and for the MSE estimator separate ``value`` and ``derivative``
streams so the two factors of each product are independent.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import comb

import numpy as np

from .circuits import EncodingCircuit, ParamCircuit
from .gradients import ShiftRule, derive_shift_rule
from .rng import RngStream, as_stream
from .simcore import kernels
from .simcore.pauli import PauliObservable, group_qubitwise_commuting
from .simcore.statevector import _group_outcome_table, sample_from_expectation

HAMILTONIAN_SAMPLING = ("none", "uniform-term", "uniform-group")
SHIFT_SAMPLING = ("none", "uniform")
WEIGHTING = ("uniform", "importance")
BATCH_MODES = ("with-replacement", "shuffle")


@dataclass(frozen=True)
class EstimatorConfig:
    """``shots=None`` means exact expectations (no measurement cost)."""

    shots: int | None = 1
    hamiltonian_sampling: str = "none"
    shift_sampling: str = "none"
    weighting: str = "uniform"
    batch_size: int = 1
    batch_mode: str = "with-replacement"

    def __post_init__(self):
        if self.shots is not None and (int(self.shots) != self.shots or self.shots < 1):
            raise ValueError("shots must be a positive integer or None for exact expectations")
        for name, allowed in (("hamiltonian_sampling", HAMILTONIAN_SAMPLING), ("shift_sampling", SHIFT_SAMPLING),
                              ("weighting", WEIGHTING), ("batch_mode", BATCH_MODES)):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")

    @property
    def exact(self) -> bool:
        return self.shots is None

    @property
    def kind(self) -> str:
        if self.shift_sampling != "none":
            return "doubly"
        return "full" if self.hamiltonian_sampling == "none" else "term-sampled"


@dataclass(frozen=True)
class GradientEstimate:
    values: np.ndarray
    measurements_used: int
    circuits_executed: int
    streams: dict = field(default_factory=dict, compare=False)


# -- shared machinery -------------------------------------------------------------------


def _size_shape(size) -> tuple[int, ...]:
    if size is None:
        return ()
    return (int(size),) if np.isscalar(size) else tuple(int(s) for s in size)


def _slot_weights(rule: ShiftRule, d: int) -> np.ndarray:
    """``W[e, i] = gamma_e`` when entry ``e`` belongs to slot ``i``."""
    w = np.zeros((rule.flat_slot.shape[0], d))
    w[np.arange(w.shape[0]), rule.flat_slot] = rule.flat_gamma
    return w


def _select_shift(rule: ShiftRule, weighting: str, gen: np.random.Generator, shape) -> tuple[np.ndarray, np.ndarray]:
    """One shift entry per slot; returns flat entry indices and correction factors ``gamma/prob``."""
    d = len(rule)
    entry = np.empty(shape + (d,), dtype=np.int64)
    corr = np.empty(shape + (d,))
    u = gen.random(shape + (d,))
    for i in range(d):
        lo, hi = rule.offsets[i], rule.offsets[i + 1]
        gam = rule.flat_gamma[lo:hi]
        if weighting == "importance":
            prob = np.abs(gam) / np.abs(gam).sum()
        else:
            prob = np.full(hi - lo, 1.0 / (hi - lo))
        cdf = np.cumsum(prob)
        cdf[-1] = 1.0
        k = np.searchsorted(cdf, u[..., i], side="right")
        entry[..., i] = lo + k
        corr[..., i] = gam[k] / prob[k]
    return entry, corr


class _ShiftedStates:
    """Exact data for all shifted circuits of one parameter vector."""

    def __init__(self, circuit: ParamCircuit, obs: PauliObservable, theta, rule: ShiftRule, initial=None):
        self.n = circuit.num_qubits
        angles = circuit.gate_angles(circuit.check_theta(theta))
        self.states = circuit.shifted_states(angles, rule.flat_gate, rule.flat_shift, initial)[0, 1:]
        self.obs = obs
        self.coeffs = obs.coeffs
        self.term_values = kernels.term_expectations(self.states, obs.paulis, self.n) if len(obs) else \
            np.zeros((self.states.shape[0], 0))
        self._class_probs: dict[int, tuple] = {}

    def group_table(self, gidx: int, group: list[int]):
        if gidx not in self._class_probs:
            paulis = [self.obs.terms[j][1] for j in group]
            basis: dict[int, str] = {}
            for p in paulis:
                basis.update(p.ops)
            rotated = kernels.rotate_to_measurement_basis(self.states, basis, self.n)
            onehot, signs = _group_outcome_table(tuple(paulis), self.n)
            probs = (np.abs(rotated) ** 2) @ onehot
            probs /= probs.sum(axis=1, keepdims=True)
            self._class_probs[gidx] = (probs, signs @ self.coeffs[group])
        return self._class_probs[gidx]

    def term_sample(self, entry: np.ndarray, term: np.ndarray, shots, gen) -> np.ndarray:
        """``c_j * (n-shot mean of P_j)`` on shifted circuit ``entry``, elementwise."""
        p = self.term_values[entry, term]
        if shots is not None:
            p = sample_from_expectation(p, shots, gen)
        return self.coeffs[term] * p

    def group_sample(self, entry: np.ndarray, gsel: np.ndarray, groups: list[list[int]], shots, gen) -> np.ndarray:
        """``sum_{j in g} c_j * (n-shot mean of P_j)``, the group's terms read from shared shots."""
        out = np.zeros(entry.shape)
        for g, group in enumerate(groups):
            mask = gsel == g
            if not mask.any():
                continue
            e = entry[mask]
            if shots is None:
                out[mask] = self.term_values[np.ix_(e, group)] @ self.coeffs[group]
                continue
            probs, weights = self.group_table(g, group)
            counts = gen.multinomial(shots, probs[e])
            out[mask] = counts @ weights / shots
        return out


def _vqe_setup(circuit, H, config, rule):
    if len(H) == 0:
        raise ValueError("Hamiltonian has no terms")
    rule = derive_shift_rule(circuit) if rule is None else rule
    if len(rule) != circuit.num_params:
        raise ValueError("shift rule does not match the circuit")
    return rule


def _stream_ids(stream: RngStream, *names) -> dict:
    return {name: stream.child(name).identifier for name in names}


# -- VQE estimators ---------------------------------------------------------------------


def vqe_cost(rule: ShiftRule, num_terms: int, config: EstimatorConfig) -> tuple[int, int]:
    """``(measurements, circuits)`` of one gradient estimate, summed over slots."""
    K = rule.num_terms
    d = len(rule)
    kind = config.kind
    if kind == "full":
        circuits, meas_per = int(K.sum()), int(K.sum()) * num_terms
    elif kind == "term-sampled":
        circuits, meas_per = int(K.sum()), int(K.sum())
    else:
        circuits, meas_per = d, d
    shots = 0 if config.exact else int(config.shots)
    return meas_per * shots, circuits


def estimate_vqe_full(circuit: ParamCircuit, H: PauliObservable, theta, config: EstimatorConfig,
                      rng: RngStream | int, size=None, rule: ShiftRule | None = None) -> GradientEstimate:
    """Every shift of every slot, every term of ``H`` measured in its own ``n``-shot context."""
    if config.kind != "full":
        raise ValueError("the full estimator takes no Hamiltonian or shift sampling")
    rule = _vqe_setup(circuit, H, config, rule)
    stream = as_stream(rng)
    shape = _size_shape(size)
    data = _ShiftedStates(circuit, H, theta, rule)
    means = data.term_values
    if not config.exact:
        means = sample_from_expectation(means, config.shots, stream.child("shots").generator(),
                                        size=shape or None)
    else:
        means = np.broadcast_to(means, shape + means.shape)
    values = (means @ data.coeffs) @ _slot_weights(rule, circuit.num_params)
    meas, circ = vqe_cost(rule, len(H), config)
    return GradientEstimate(values, meas, circ, _stream_ids(stream, "shots"))


def estimate_vqe_term_sampled(circuit: ParamCircuit, H: PauliObservable, theta, config: EstimatorConfig,
                              rng: RngStream | int, size=None, rule: ShiftRule | None = None) -> GradientEstimate:
    """Per slot, one uniformly drawn term (or commuting group), all shifts, correction M (or G)."""
    if config.kind != "term-sampled":
        raise ValueError("term sampling needs hamiltonian_sampling set and shift_sampling='none'")
    rule = _vqe_setup(circuit, H, config, rule)
    stream = as_stream(rng)
    shape = _size_shape(size)
    data = _ShiftedStates(circuit, H, theta, rule)
    sel_gen = stream.child("select").generator()
    shot_gen = stream.child("shots").generator()
    num_entries = rule.flat_slot.shape[0]
    entry = np.broadcast_to(np.arange(num_entries), shape + (num_entries,))
    if config.hamiltonian_sampling == "uniform-term":
        count = len(H)
        pick = sel_gen.integers(count, size=shape + (circuit.num_params,))
        vals = data.term_sample(entry, pick[..., rule.flat_slot], config.shots, shot_gen)
    else:
        groups = group_qubitwise_commuting(H)
        count = len(groups)
        pick = sel_gen.integers(count, size=shape + (circuit.num_params,))
        vals = data.group_sample(entry, pick[..., rule.flat_slot], groups, config.shots, shot_gen)
    values = count * vals @ _slot_weights(rule, circuit.num_params)
    meas, circ = vqe_cost(rule, len(H), config)
    return GradientEstimate(values, meas, circ, _stream_ids(stream, "select", "shots"))


def estimate_vqe_doubly(circuit: ParamCircuit, H: PauliObservable, theta, config: EstimatorConfig,
                        rng: RngStream | int, size=None, rule: ShiftRule | None = None) -> GradientEstimate:
    """Per slot, one term (or group) and one shift entry; a single ``n``-shot measurement."""
    if config.kind != "doubly" or config.hamiltonian_sampling == "none":
        raise ValueError("the doubly stochastic estimator needs both Hamiltonian and shift sampling")
    rule = _vqe_setup(circuit, H, config, rule)
    stream = as_stream(rng)
    shape = _size_shape(size)
    data = _ShiftedStates(circuit, H, theta, rule)
    sel_gen = stream.child("select").generator()
    shot_gen = stream.child("shots").generator()
    d = circuit.num_params
    if config.hamiltonian_sampling == "uniform-term":
        count = len(H)
        pick = sel_gen.integers(count, size=shape + (d,))
        entry, corr = _select_shift(rule, config.weighting, sel_gen, shape)
        vals = data.term_sample(entry, pick, config.shots, shot_gen)
    else:
        groups = group_qubitwise_commuting(H)
        count = len(groups)
        pick = sel_gen.integers(count, size=shape + (d,))
        entry, corr = _select_shift(rule, config.weighting, sel_gen, shape)
        vals = data.group_sample(entry, pick, groups, config.shots, shot_gen)
    meas, circ = vqe_cost(rule, len(H), config)
    return GradientEstimate(count * corr * vals, meas, circ, _stream_ids(stream, "select", "shots"))


def estimate_vqe(circuit: ParamCircuit, H: PauliObservable, theta, config: EstimatorConfig,
                 rng: RngStream | int, size=None, rule: ShiftRule | None = None) -> GradientEstimate:
    """Dispatch on ``config.kind``."""
    fn = {"full": estimate_vqe_full, "term-sampled": estimate_vqe_term_sampled,
          "doubly": estimate_vqe_doubly}[config.kind]
    return fn(circuit, H, theta, config, rng, size=size, rule=rule)


# -- MSE estimator ----------------------------------------------------------------------


def _features_labels(dataset) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(dataset, "features"):
        return np.asarray(dataset.features), np.asarray(dataset.labels, dtype=float)
    x, y = dataset
    return np.asarray(x), np.asarray(y, dtype=float)


def mse_cost(rule: ShiftRule, num_terms: int, config: EstimatorConfig) -> tuple[int, int]:
    """``|B| (K_i + 1)`` circuits per slot (``|B| * 2`` with shift sampling), times ``n`` per term."""
    K = rule.num_terms
    per_slot = np.full(len(rule), 2) if config.shift_sampling != "none" else K + 1
    circuits = int(config.batch_size * per_slot.sum())
    shots = 0 if config.exact else int(config.shots)
    return circuits * shots * num_terms, circuits


def draw_batch(num_instances: int, batch_size: int, rng: RngStream | int, size=None) -> np.ndarray:
    """Uniform instance indices, drawn with replacement."""
    if batch_size > num_instances:
        raise ValueError(f"batch size {batch_size} exceeds dataset size {num_instances}")
    gen = as_stream(rng).generator()
    return gen.integers(num_instances, size=_size_shape(size) + (batch_size,))


class EpochBatcher:
    """Shuffle-and-walk batches: each epoch visits every instance once, in a seeded random order."""

    def __init__(self, num_instances: int, batch_size: int, rng: RngStream | int):
        if batch_size > num_instances:
            raise ValueError(f"batch size {batch_size} exceeds dataset size {num_instances}")
        self.num_instances = num_instances
        self.batch_size = batch_size
        self.stream = as_stream(rng)

    @property
    def batches_per_epoch(self) -> int:
        return -(-self.num_instances // self.batch_size)

    def batch(self, step: int) -> np.ndarray:
        epoch, pos = divmod(step, self.batches_per_epoch)
        order = self.stream.child(epoch).generator().permutation(self.num_instances)
        return order[pos * self.batch_size:(pos + 1) * self.batch_size]


def estimate_mse(model: EncodingCircuit, obs: PauliObservable, theta, dataset, config: EstimatorConfig,
                 rng: RngStream | int, size=None, batch=None, rule: ShiftRule | None = None) -> GradientEstimate:
    """Gradient of the batch mean of ``(<O>_x - y)^2`` from products of independent estimates.

    For each instance and slot, ``o`` (the n-shot readout at ``theta``) and ``g``
    (the parameter-shift combination) are built from disjoint substreams and
    combined as ``2 o g - 2 y g``. ``batch`` overrides the instance draw (for
    shuffle-and-walk epochs); otherwise instances are drawn with replacement.
    """
    if config.hamiltonian_sampling != "none":
        raise ValueError("the MSE estimator samples instances and shifts, not observable terms")
    circuit = model.circuit
    rule = derive_shift_rule(circuit) if rule is None else rule
    x, y = _features_labels(dataset)
    if x.shape[0] == 0:
        raise ValueError("dataset is empty")
    stream = as_stream(rng)
    shape = _size_shape(size)
    if batch is None:
        idx = draw_batch(x.shape[0], config.batch_size, stream.child("batch"), size)
    else:
        idx = np.asarray(batch, dtype=np.int64)
        if idx.size == 0:
            raise ValueError("empty batch")
        idx = np.broadcast_to(idx, shape + idx.shape)
    d = circuit.num_params
    E = rule.flat_slot.shape[0]
    # exact term values for the unshifted and every shifted circuit of each needed instance
    uniq, inv = np.unique(idx, return_inverse=True)
    inv = inv.reshape(idx.shape)
    base = circuit.gate_angles(circuit.check_theta(theta))
    states = circuit.shifted_states(base, rule.flat_gate, rule.flat_shift,
                                    model.encoder.batch(x[uniq])).reshape(-1, 1 << circuit.num_qubits)
    tv = kernels.term_expectations(states, obs.paulis, circuit.num_qubits).reshape(uniq.shape[0], E + 1, len(obs))
    coeffs = obs.coeffs
    value_gen = stream.child("value").generator()
    deriv_gen = stream.child("derivative").generator()

    def readout(p, gen):
        if not config.exact:
            p = sample_from_expectation(p, config.shots, gen)
        return p @ coeffs

    # o: fresh n-shot readout per (instance, slot)
    o = readout(np.broadcast_to(tv[inv, 0][..., None, :], idx.shape + (d, len(obs))), value_gen)
    if config.shift_sampling == "none":
        g = readout(tv[inv, 1:], deriv_gen) @ _slot_weights(rule, d)
    else:
        entry, corr = _select_shift(rule, config.weighting, stream.child("select").generator(), idx.shape)
        picked = np.take_along_axis(tv[inv, 1:], entry[..., None], axis=-2)
        g = corr * readout(picked, deriv_gen)
    resid = 2.0 * o - 2.0 * y[idx][..., None]
    values = (resid * g).mean(axis=-2)
    meas, circ = mse_cost(rule, len(obs), replace(config, batch_size=idx.shape[-1]))
    return GradientEstimate(values, meas, circ, _stream_ids(stream, "batch", "value", "derivative", "select"))


# -- regularization ---------------------------------------------------------------------


@dataclass(frozen=True)
class Regularizer:
    """L2 penalty ``strength * ||theta||^2``."""

    strength: float = 0.0

    def __post_init__(self):
        if self.strength < 0:
            raise ValueError("regularization strength must be non-negative")

    def value(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(self.strength * theta @ theta)

    def gradient(self, theta) -> np.ndarray:
        return 2.0 * self.strength * np.asarray(theta, dtype=float)


def add_regularizer(est: GradientEstimate, reg: Regularizer, theta) -> GradientEstimate:
    """Add the deterministic penalty gradient; cost fields are unchanged."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1:] != est.values.shape[-1:]:
        raise ValueError(f"theta has shape {theta.shape}, estimate has {est.values.shape}")
    return replace(est, values=est.values + reg.gradient(theta))


# -- polynomial of an expectation ----------------------------------------------------------


@dataclass(frozen=True)
class PolynomialEstimator:
    """``f(x) = sum_j a_j x^j`` estimated from ``m`` i.i.d. samples of ``x``."""

    coefficients: tuple[float, ...]
    m: int

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(a) for a in self.coefficients))
        if not self.coefficients:
            raise ValueError("polynomial needs at least one coefficient")
        if self.m < self.degree:
            raise ValueError(f"sample budget m={self.m} is below the degree {self.degree}")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coefficients)


def _elementary_symmetric(x: np.ndarray, k: int) -> np.ndarray:
    """``e_0 .. e_k`` of the last axis of ``x``, shape ``(k + 1, ...)``."""
    e = np.zeros((k + 1,) + x.shape[:-1])
    e[0] = 1.0
    for i in range(x.shape[-1]):
        xi = x[..., i]
        for j in range(min(i + 1, k), 0, -1):
            e[j] = e[j] + xi * e[j - 1]
    return e


def u_statistic(poly: PolynomialEstimator, samples) -> np.ndarray | float:
    """Average of ``h(x_1..x_k) = a_0 + sum_j a_j x_1 ... x_j`` over ordered arrangements of distinct samples.

    A product of the first ``j`` positions averages to ``e_j(x) / C(m, j)``. The
    samples are sorted first so any permutation gives a bit-identical result. The
    last axis of ``samples`` holds the ``m`` samples; leading axes are independent draws.
    """
    x = np.sort(np.asarray(samples, dtype=float), axis=-1)
    m = x.shape[-1]
    if m != poly.m:
        raise ValueError(f"expected {poly.m} samples, got {m}")
    k = poly.degree
    e = _elementary_symmetric(x, k)
    out = sum(a * e[j] / comb(m, j) for j, a in enumerate(poly.coefficients))
    return float(out) if np.ndim(out) == 0 else out


def plugin_estimate(poly: PolynomialEstimator, samples) -> np.ndarray | float:
    """The biased plug-in estimate ``f(sample mean)``."""
    out = poly(np.mean(np.asarray(samples, dtype=float), axis=-1))
    return float(out) if np.ndim(out) == 0 else out
