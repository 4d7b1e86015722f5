"""Parameterized circuits, the three ansatz families, and a plain-text gate format.

A :class:`ParamCircuit` is an immutable gate list in which every rotation reads
its angle from a parameter slot. Several gates may share one slot (QAOA layers).
Simulation is batched: ``simulate`` takes one angle per *rotation gate* for each
row, which is what parameter-shift evaluation needs (shifting a single gate of a
shared slot).
"""
from __future__ import annotations

from collections.abc import Iterable, Sequence

import numpy as np

from .simcore import kernels
from .simcore.gates import FIXED_MATRICES, Gate, pauli_local_matrix
from .simcore.pauli import PauliObservable, PauliString
from .simcore.statevector import MAX_QUBITS, StateVector

_PERMUTATION_GATES = ("CNOT", "X", "SWAP")
# largest state dimension for which a commuting run is applied as one dense matrix
_DENSE_BLOCK_DIM = 256


def _local_block(local: dict, angles: np.ndarray, n: int) -> np.ndarray:
    """Dense product of single-qubit rotations ``{qubit: (pauli matrix, coeff, gate)}``."""
    out = np.ones((1, 1), dtype=complex)
    eye = np.eye(2)
    for q in range(n - 1, -1, -1):
        if q in local:
            pauli, coeff, p = local[q]
            a = coeff * angles[p]
            out = np.kron(out, np.cos(a) * eye - 1j * np.sin(a) * pauli)
        else:
            out = np.kron(out, eye)
    return out


class ParamCircuit:
    """Ordered gates on ``num_qubits`` qubits with ``num_params`` shared parameter slots."""

    def __init__(self, num_qubits: int, gates: Iterable[Gate] = (), num_params: int | None = None):
        if not 1 <= num_qubits <= MAX_QUBITS:
            raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
        gates = tuple(gates)
        for g in gates:
            if not isinstance(g, Gate):
                raise TypeError(f"expected Gate, got {type(g).__name__}")
            if max(g.targets, default=-1) >= num_qubits:
                raise ValueError(f"gate {g.name} on {g.targets} does not fit on {num_qubits} qubits")
        param_gates = tuple(i for i, g in enumerate(gates) if g.kind == "rotation")
        slots = np.array([gates[i].slot for i in param_gates], dtype=np.int64)
        if num_params is None:
            num_params = int(slots.max()) + 1 if slots.size else 0
        if slots.size and slots.max() >= num_params:
            raise ValueError(f"slot {int(slots.max())} out of range for {num_params} parameters")
        unbound = sorted(set(range(num_params)) - set(slots.tolist()))
        if unbound:
            raise ValueError(f"parameter slots {unbound} are not bound to any gate")
        slots.setflags(write=False)
        self.num_qubits = int(num_qubits)
        self.gates = gates
        self.num_params = int(num_params)
        self.param_gates = param_gates
        self.gate_slots = slots
        self._slot_members = tuple(
            tuple(int(p) for p in np.flatnonzero(slots == s)) for s in range(self.num_params))
        self._program, self._prefix = self._compile()
        self._blocks, self._block_prefix = self._compile_blocks()
        self._zero_prefix: np.ndarray | None = None

    def __len__(self):
        return len(self.gates)

    def __repr__(self):
        return f"ParamCircuit(num_qubits={self.num_qubits}, gates={len(self.gates)}, num_params={self.num_params})"

    # -- bookkeeping ------------------------------------------------------------------

    @property
    def binding(self) -> dict[int, int]:
        """Gate index -> parameter slot, for rotation gates only."""
        return {i: self.gates[i].slot for i in self.param_gates}

    @property
    def num_param_gates(self) -> int:
        return len(self.param_gates)

    def slot_gates(self, slot: int) -> tuple[int, ...]:
        """Positions (into ``param_gates``) of the rotations bound to ``slot``."""
        if not 0 <= slot < self.num_params:
            raise IndexError(f"slot {slot} out of range for {self.num_params} parameters")
        return self._slot_members[slot]

    def check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1:] != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got shape {theta.shape}")
        return theta

    def gate_angles(self, theta) -> np.ndarray:
        """Per-rotation angles ``theta[..., slot(g)]``, shape ``(..., num_param_gates)``."""
        return self.check_theta(theta)[..., self.gate_slots]

    def append(self, gate: Gate) -> ParamCircuit:
        num_params = self.num_params
        if gate.kind == "rotation":
            num_params = max(num_params, gate.slot + 1)
        return ParamCircuit(self.num_qubits, self.gates + (gate,), num_params)

    # -- compiled simulation ----------------------------------------------------------

    def _compile(self):
        """Fuse runs of diagonal rotations and of permutation gates; split off the fixed prefix."""
        n = self.num_qubits
        program: list[tuple] = []
        pos = {gi: p for p, gi in enumerate(self.param_gates)}
        diag: list[tuple[int, int, float]] = []
        perm: np.ndarray | None = None

        def flush():
            nonlocal diag, perm
            if diag:
                masks = [m for m, _, _ in diag]
                signs = np.stack([kernels.parity_signs(n, m) for m in masks])
                ps = np.array([p for _, p, _ in diag], dtype=np.int64)
                coeffs = np.array([c for _, _, c in diag])
                program.append(("diag", ps, coeffs, signs))
                diag = []
            if perm is not None:
                program.append(("perm", perm))
                perm = None

        for gi, g in enumerate(self.gates):
            if g.is_pauli_rotation and g.generator.is_diagonal:
                if perm is not None:
                    flush()
                diag.append((g.generator.z_mask, pos[gi], g.coeff))
                continue
            if g.kind == "fixed" and g.name in _PERMUTATION_GATES and g.matrix is FIXED_MATRICES[g.name]:
                if diag:
                    flush()
                idx = kernels._permutation(n, g.name, g.targets)
                perm = idx if perm is None else perm[idx]
                continue
            flush()
            if g.kind == "fixed":
                program.append(("fixed", g))
            else:
                program.append(("rot", g, pos[gi]))
        flush()
        prefix = 0
        while prefix < len(program) and program[prefix][0] in ("fixed", "perm"):
            prefix += 1
        return tuple(program), prefix

    def _compile_blocks(self):
        """Group gates into fixed ops and runs of mutually commuting rotations.

        Used by :meth:`shifted_states`: a shift of any rotation inside a commuting run
        can be applied after the whole run.
        """
        n = self.num_qubits
        pos = {gi: p for p, gi in enumerate(self.param_gates)}
        blocks: list[tuple] = []
        run: list[int] = []
        perm: np.ndarray | None = None

        def close_run():
            nonlocal run
            if run:
                blocks.append(self._rotation_block(run, pos))
                run = []

        def close_perm():
            nonlocal perm
            if perm is not None:
                blocks.append(("perm", perm))
                perm = None

        for gi, g in enumerate(self.gates):
            if g.kind == "fixed":
                close_run()
                if g.name in _PERMUTATION_GATES and g.matrix is FIXED_MATRICES[g.name]:
                    idx = kernels._permutation(n, g.name, g.targets)
                    perm = idx if perm is None else perm[idx]
                else:
                    close_perm()
                    blocks.append(("fixed", g))
                continue
            close_perm()
            if run and not (g.is_pauli_rotation and all(
                    self.gates[o].is_pauli_rotation and g.generator.commutes(self.gates[o].generator)
                    for o in run)):
                close_run()
            run.append(gi)
        close_run()
        close_perm()
        prefix = 0
        while prefix < len(blocks) and blocks[prefix][0] in ("fixed", "perm"):
            prefix += 1
        return tuple(blocks), prefix

    def _rotation_block(self, members: list[int], pos: dict[int, int]) -> tuple:
        n = self.num_qubits
        diag = [gi for gi in members if self.gates[gi].is_pauli_rotation and self.gates[gi].generator.is_diagonal]
        other = tuple((self.gates[gi], pos[gi]) for gi in members if gi not in diag)
        ps = np.array([pos[gi] for gi in diag], dtype=np.int64)
        coeffs = np.array([self.gates[gi].coeff for gi in diag])
        signs = (np.stack([kernels.parity_signs(n, self.gates[gi].generator.z_mask) for gi in diag])
                 if diag else np.zeros((0, 1 << n)))
        # gather tables for applying a different Pauli rotation to each branch row at once
        tables = None
        if other and all(g.is_pauli_rotation for g, _ in other):
            actions = [kernels.pauli_action(n, g.generator) for g, _ in other]
            tables = (np.array([p for _, p in other], dtype=np.int64), np.array([g.coeff for g, _ in other]),
                      np.stack([a[0] for a in actions]), np.stack([a[1] for a in actions]))
        # single-qubit rotations on distinct qubits: the dense block is a Kronecker product
        local = None
        qubits = [g.targets for g, _ in other]
        if tables is not None and all(len(t) == 1 for t in qubits) and len(set(qubits)) == len(qubits):
            local = {t[0]: (pauli_local_matrix(g.generator), g.coeff, p) for (g, p), t in zip(other, qubits)}
        blocks_data = (ps, coeffs, signs, other, np.array([pos[gi] for gi in members], dtype=np.int64), tables, local)
        return ("block",) + blocks_data

    def shifted_states(self, angles, gates, shifts, initial=None) -> np.ndarray:
        """Final states of the base circuit and of single-gate shifted copies.

        ``angles`` holds one angle per rotation gate. Entry ``e`` adds ``shifts[e]`` to
        rotation ``gates[e]`` only. Returns ``(B0, 1 + E, 2**N)``: column 0 is the base
        state and column ``1 + e`` the shifted one, for each of the ``B0`` initial states.
        All rows share the base angles, so the sweep runs once and shifted copies branch
        off where their gate sits.
        """
        angles = np.asarray(angles, dtype=float)
        if angles.shape != (self.num_param_gates,):
            raise ValueError(f"expected {self.num_param_gates} gate angles, got shape {angles.shape}")
        gates = np.asarray(gates, dtype=np.int64).reshape(-1)
        shifts = np.asarray(shifts, dtype=float).reshape(-1)
        if gates.shape != shifts.shape:
            raise ValueError("gates and shifts must have the same length")
        if gates.size and (gates.min() < 0 or gates.max() >= self.num_param_gates):
            raise ValueError("shifted gate index out of range")
        n = self.num_qubits
        dim = 1 << n
        blocks = self._blocks
        if initial is None:
            if self._zero_prefix is None:
                self.simulate(angles[None, :])
            base = np.array(self._zero_prefix)
            blocks = blocks[self._block_prefix:]
        else:
            base = initial.amplitudes if isinstance(initial, StateVector) else np.asarray(initial, dtype=complex)
            if base.shape[-1] != dim:
                raise ValueError(f"initial state has length {base.shape[-1]}, circuit needs {dim}")
            base = np.array(np.atleast_2d(base), dtype=complex)
        b0, num = base.shape[0], gates.size
        buf = np.empty((b0 * (1 + num), dim), dtype=complex)
        buf[:b0] = base
        used = b0
        start = np.empty(num, dtype=np.int64)
        order = np.argsort(gates, kind="stable")
        sorted_gates = gates[order]
        for blk in blocks:
            kind = blk[0]
            live = buf[:used]
            if kind == "perm":
                buf[:used] = live[:, blk[1]]
                continue
            if kind == "fixed":
                buf[:used] = kernels.apply_fixed(live, blk[1], n)
                continue
            _, ps, coeffs, signs, other, members, tables, local = blk
            if ps.size:
                live *= np.exp(-1j * ((angles[ps] * coeffs) @ signs))
            if len(other) > 1 and dim <= _DENSE_BLOCK_DIM:
                if local is not None:
                    block = _local_block(local, angles, n).T
                else:
                    block = np.eye(dim, dtype=complex)
                    for g, p in other:
                        block = kernels.apply_rotation(block, g, angles[p], n)
                # rows of ``block`` are images of basis rows, so states map to states @ block
                buf[:used] = live @ block
            else:
                for g, p in other:
                    buf[:used] = kernels.apply_rotation(buf[:used], g, angles[p], n)
            # branch the entries whose gate lies in this block
            lo = np.searchsorted(sorted_gates, members.min())
            hi = np.searchsorted(sorted_gates, members.max(), side="right")
            hit = order[lo:hi][np.isin(sorted_gates[lo:hi], members)]
            if not hit.size:
                continue
            k = hit.size
            rows = np.tile(buf[:b0], (k, 1))
            row_gate = np.repeat(gates[hit], b0)
            row_shift = np.repeat(shifts[hit], b0)
            if ps.size:
                delta = np.where(row_gate[:, None] == ps[None, :], row_shift[:, None], 0.0)
                rows *= np.exp(-1j * ((delta * coeffs) @ signs))
            if tables is not None:
                sel = np.flatnonzero(np.isin(row_gate, tables[0]))
                if sel.size:
                    which = np.searchsorted(tables[0], row_gate[sel])
                    half = tables[1][which] * row_shift[sel]
                    sub = rows[sel]
                    flipped = np.take_along_axis(sub, tables[2][which], axis=1) * tables[3][which]
                    rows[sel] = np.cos(half)[:, None] * sub - 1j * np.sin(half)[:, None] * flipped
            else:
                for g, p in other:
                    sel = np.flatnonzero(row_gate == p)
                    if sel.size:
                        rows[sel] = kernels.apply_rotation(rows[sel], g, row_shift[sel], n)
            buf[used:used + k * b0] = rows
            start[hit] = used + b0 * np.arange(k)
            used += k * b0
        index = np.concatenate([np.zeros(1, dtype=np.int64), start])[None, :] + np.arange(b0)[:, None]
        return buf[index]

    @staticmethod
    def _run(states: np.ndarray, ops, angles: np.ndarray, n: int) -> np.ndarray:
        for op in ops:
            kind = op[0]
            if kind == "perm":
                states = states[:, op[1]]
            elif kind == "diag":
                _, ps, coeffs, signs = op
                states = states * np.exp(-1j * ((angles[:, ps] * coeffs) @ signs))
            elif kind == "rot":
                states = kernels.apply_rotation(states, op[1], angles[:, op[2]], n)
            else:
                states = kernels.apply_fixed(states, op[1], n)
        return states

    def simulate(self, angles, initial=None) -> np.ndarray:
        """Batched final states for per-gate ``angles`` of shape ``(B, num_param_gates)``.

        ``initial`` is ``None`` (all-zeros state), one state of length ``2**N`` shared
        by every row, or a ``(B, 2**N)`` array of per-row initial states.
        """
        angles = np.atleast_2d(np.asarray(angles, dtype=float))
        if angles.shape[1] != self.num_param_gates:
            raise ValueError(f"expected {self.num_param_gates} gate angles per row, got {angles.shape[1]}")
        n = self.num_qubits
        dim = 1 << n
        batch = angles.shape[0]
        ops = self._program
        if initial is None:
            if self._zero_prefix is None:
                zero = np.zeros((1, dim), dtype=complex)
                zero[0, 0] = 1.0
                self._zero_prefix = self._run(zero, ops[:self._prefix], angles[:1], n)
            start = np.broadcast_to(self._zero_prefix, (batch, dim))
            ops = ops[self._prefix:]
        else:
            init = initial.amplitudes if isinstance(initial, StateVector) else np.asarray(initial, dtype=complex)
            if init.shape[-1] != dim:
                raise ValueError(f"initial state has length {init.shape[-1]}, circuit needs {dim}")
            start = np.broadcast_to(init, (batch, dim)) if init.ndim == 1 else init
            if start.shape[0] != batch:
                raise ValueError("initial state batch does not match angle batch")
        if not ops:
            return np.array(start, dtype=complex)
        return self._run(start, ops, angles, n)

    def states(self, theta, initial=None) -> np.ndarray:
        """Final states for a batch of parameter vectors ``theta`` of shape ``(B, d)``."""
        return self.simulate(self.gate_angles(np.atleast_2d(theta)), initial)

    def unitary(self, theta) -> np.ndarray:
        """Dense unitary (columns are images of basis states); for small circuits and tests."""
        dim = 1 << self.num_qubits
        angles = np.broadcast_to(self.gate_angles(theta), (dim, self.num_param_gates))
        return self.simulate(angles, np.eye(dim, dtype=complex)).T

    # -- text format ------------------------------------------------------------------

    def to_text(self) -> str:
        """One gate per line, ``NAME targets [slot=s|angle=a] [coeff=c]``."""
        lines = [f"# qubits={self.num_qubits} params={self.num_params}"]
        for g in self.gates:
            parts = [g.name, *map(str, g.targets)]
            if g.kind == "rotation":
                if not g.is_pauli_rotation:
                    raise ValueError(f"gate {g.name} has a matrix generator and cannot be serialized")
                parts.append(f"slot={g.slot}")
                if g.coeff != _default_coeff(g.name):
                    parts.append(f"coeff={g.coeff!r}")
            elif g.angle is not None:
                parts.append(f"angle={g.angle!r}")
                if not np.allclose(_parse_rotation(g.name, g.targets, None, g.angle, None).matrix, g.matrix):
                    raise ValueError(f"fixed rotation {g.name} does not round-trip")
            elif g.name not in FIXED_MATRICES or not np.array_equal(g.matrix, FIXED_MATRICES[g.name]):
                raise ValueError(f"custom fixed gate {g.name} cannot be serialized")
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> ParamCircuit:
        header: dict[str, int] = {}
        gates: list[Gate] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        header[k] = int(v)
                continue
            if not line:
                continue
            name, *rest = line.split()
            targets = [int(t) for t in rest if "=" not in t]
            opts = dict(t.split("=", 1) for t in rest if "=" in t)
            unknown = set(opts) - {"slot", "angle", "coeff"}
            if unknown:
                raise ValueError(f"line {lineno}: unknown fields {sorted(unknown)}")
            slot = int(opts["slot"]) if "slot" in opts else None
            angle = float(opts["angle"]) if "angle" in opts else None
            coeff = float(opts["coeff"]) if "coeff" in opts else None
            try:
                if slot is None and angle is None:
                    gates.append(Gate.fixed(name, targets))
                else:
                    gates.append(_parse_rotation(name, targets, slot, angle, coeff))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        if "qubits" not in header:
            num_qubits = max((max(g.targets) for g in gates), default=0) + 1
        else:
            num_qubits = header["qubits"]
        return cls(num_qubits, gates, header.get("params"))


def _default_coeff(name: str) -> float:
    return 1.0 if name.startswith("EXP_") else 0.5


def _parse_rotation(name: str, targets, slot, angle, coeff) -> Gate:
    if slot is not None and angle is not None:
        raise ValueError("a gate takes either slot= or angle=, not both")
    if name.startswith("EXP_"):
        letters = name[4:]
    elif name.startswith("R"):
        letters = name[1:]
    else:
        raise ValueError(f"unknown rotation {name!r}")
    if len(letters) != len(targets) or set(letters) - set("XYZ"):
        raise ValueError(f"rotation {name!r} does not match targets {targets}")
    pauli = PauliString(zip(targets, letters))
    coeff = _default_coeff(name) if coeff is None else coeff
    if angle is not None:
        return Gate.fixed_rotation(pauli, angle, coeff=coeff)
    return Gate.rotation(pauli, slot, coeff=coeff, name=name)


# -- ansatz builders ------------------------------------------------------------------


def _cnot_ladder(num_qubits: int) -> list[Gate]:
    """CNOTs on (j, j+1) for even j, then for odd j; an unpaired last qubit gets none."""
    out = []
    for start in (0, 1):
        for j in range(start, num_qubits - 1, 2):
            out.append(Gate.fixed("CNOT", (j, j + 1)))
    return out


def build_sigma_block_ansatz(num_qubits: int, num_blocks: int) -> ParamCircuit:
    """Fixed R_Y(pi/4) block, then ``num_blocks`` parameterized blocks cycling X, Y, Z.

    Every block is a layer of single-qubit rotations (one slot each) followed by
    the even/odd CNOT ladder, giving ``num_blocks * num_qubits`` slots.
    """
    if num_qubits < 2:
        raise ValueError("the sigma-block ansatz needs at least 2 qubits")
    if num_blocks < 1:
        raise ValueError("num_blocks must be at least 1")
    gates = [Gate.fixed_rotation(PauliString({q: "Y"}), np.pi / 4) for q in range(num_qubits)]
    gates += _cnot_ladder(num_qubits)
    for b in range(num_blocks):
        axis = "XYZ"[b % 3]
        for q in range(num_qubits):
            gates.append(Gate.rotation(PauliString({q: axis}), slot=b * num_qubits + q))
        gates += _cnot_ladder(num_qubits)
    return ParamCircuit(num_qubits, gates, num_blocks * num_qubits)


def mixer_ground_state_prep(num_qubits: int) -> list[Gate]:
    """X then H on every qubit: prepares |->^N, the ground state of sum_j X_j."""
    return [g for q in range(num_qubits) for g in (Gate.fixed("X", (q,)), Gate.fixed("H", (q,)))]


def build_qaoa_ansatz(problem: PauliObservable, mixer: PauliObservable, depth: int,
                      num_qubits: int | None = None, prepare: Sequence[Gate] | None = None) -> ParamCircuit:
    """Alternating ``exp(-i theta_{2l} H^P) exp(-i theta_{2l+1} H^B)`` layers, ``2 * depth`` slots.

    Each nonzero term ``c P`` becomes one gate ``exp(-i theta c P)`` bound to its
    layer's slot. ``prepare`` defaults to the |->^N preparation, appropriate for
    the transverse-field mixer.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    for label, ham in (("problem", problem), ("mixer", mixer)):
        if not any(c != 0 for c, _ in ham.terms):
            raise ValueError(f"{label} Hamiltonian has no nonzero terms")
        if not ham.mutually_commuting():
            raise ValueError(f"{label} Hamiltonian terms do not mutually commute")
        if any(len(p) == 0 for c, p in ham.terms if c != 0):
            raise ValueError(f"{label} Hamiltonian has an identity term")
    if num_qubits is None:
        num_qubits = max(problem.max_qubit(), mixer.max_qubit()) + 1
    gates = list(mixer_ground_state_prep(num_qubits) if prepare is None else prepare)
    for layer in range(depth):
        for offset, ham in ((0, problem), (1, mixer)):
            slot = 2 * layer + offset
            gates += [Gate.rotation(p, slot, coeff=c) for c, p in ham.terms if c != 0]
    return ParamCircuit(num_qubits, gates, 2 * depth)


class AmplitudeEncoder:
    """Loads a unit vector of length ``2**N`` directly as state amplitudes."""

    def __init__(self, num_qubits: int, tol: float = 1e-8):
        self.num_qubits = num_qubits
        self.tol = tol

    def __call__(self, x) -> StateVector:
        return build_amplitude_encoder(x, self.tol, self.num_qubits)

    def batch(self, xs) -> np.ndarray:
        """Amplitude rows for a ``(B, 2**N)`` feature matrix."""
        xs = np.atleast_2d(np.asarray(xs))
        if xs.shape[1] != 1 << self.num_qubits:
            raise ValueError(f"features must have length {1 << self.num_qubits}")
        norms = np.linalg.norm(xs, axis=1)
        if np.any(np.abs(norms - 1.0) > self.tol):
            raise ValueError("feature vectors must have unit 2-norm")
        return xs.astype(complex)


def build_amplitude_encoder(x, tol: float = 1e-8, num_qubits: int | None = None) -> StateVector:
    """State whose amplitudes are the entries of the unit vector ``x``."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("amplitude encoding takes a 1-d vector")
    dim = x.shape[0]
    if dim < 2 or dim & (dim - 1):
        raise ValueError(f"vector length must be a power of two >= 2, got {dim}")
    if num_qubits is not None and dim != 1 << num_qubits:
        raise ValueError(f"vector length {dim} does not match {num_qubits} qubits")
    if abs(np.linalg.norm(x) - 1.0) > tol:
        raise ValueError("vector is not normalized")
    return StateVector(x.astype(complex), check=False)


class EncodingCircuit:
    """A parameterized circuit applied to an amplitude-encoded data state."""

    def __init__(self, circuit: ParamCircuit, encoder: AmplitudeEncoder | None = None):
        self.circuit = circuit
        self.encoder = encoder or AmplitudeEncoder(circuit.num_qubits)
        if self.encoder.num_qubits != circuit.num_qubits:
            raise ValueError("encoder and circuit disagree on the number of qubits")

    def states(self, theta, xs) -> np.ndarray:
        """Final states for every row of ``xs`` at one parameter vector."""
        init = self.encoder.batch(xs)
        angles = np.broadcast_to(self.circuit.gate_angles(theta), (init.shape[0], self.circuit.num_param_gates))
        return self.circuit.simulate(angles, init)


def evaluate(circuit: ParamCircuit, theta, initial: StateVector | None = None) -> StateVector:
    """``U(theta)`` applied to ``initial`` (default all-zeros)."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circuit.num_params,):
        raise ValueError(f"expected {circuit.num_params} parameters, got shape {theta.shape}")
    if initial is not None and initial.num_qubits != circuit.num_qubits:
        raise ValueError(f"initial state has {initial.num_qubits} qubits, circuit has {circuit.num_qubits}")
    out = circuit.simulate(circuit.gate_angles(theta)[None, :], initial)[0]
    return StateVector(out, check=False)
