"""Dense statevector simulation: gate kernels, circuits, expectations.

Amplitude index convention: basis state ``|b>`` stores qubit ``q`` in bit
``q`` of the integer index ``b``, i.e. qubit 0 is the least significant
bit. All kernels act on the **last axis** of the amplitude array, so a
``(batch, 2**n)`` stack of states goes through the same code path as a
single ``(2**n,)`` state; per-row results are bitwise identical either way.

Gate set and matrix conventions:

* ``RA(phi) = exp(-i * phi * A / 2)`` for ``A in {X, Y, Z}``,
* ``CP(phi) = diag(1, 1, 1, exp(i*phi))`` on the (control, target) pair,
* ``CZ`` executes through the CP kernel at ``phi = pi`` so that a fully
  activated gated entangler reproduces it exactly.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .hamiltonian import Hamiltonian

ROTATION_KINDS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATION_KINDS + ("CP", "CZ")

DEFAULT_MAX_QUBITS = 20

# Imaginary residue allowed when reducing <psi|H|psi> to a real energy.
IMAG_TOLERANCE = 1e-10


@dataclass(frozen=True)
class GateInstance:
    """A single gate: kind, qubit indices, and optional parameter slot.

    Rotations act on one qubit and always carry a slot; CP acts on an
    ordered (control, target) pair and carries a slot; CZ is fixed and
    carries none.
    """

    kind: str
    qubits: tuple[int, ...]
    param_slot: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind in ROTATION_KINDS:
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind} acts on exactly one qubit")
            if self.param_slot is None:
                raise ValueError(f"{self.kind} requires a parameter slot")
        else:
            if len(self.qubits) != 2:
                raise ValueError(f"{self.kind} acts on a (control, target) pair")
            if self.qubits[0] == self.qubits[1]:
                raise ValueError("control and target must differ")
            if self.kind == "CZ" and self.param_slot is not None:
                raise ValueError("CZ is fixed and carries no parameter slot")
            if self.kind == "CP" and self.param_slot is None:
                raise ValueError("CP requires a parameter slot")


@dataclass(frozen=True)
class Circuit:
    """An ordered gate list over ``n_qubits`` with dense parameter slots."""

    n_qubits: int
    gates: tuple[GateInstance, ...]
    n_param_slots: int

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        seen_slots = set()
        for gate in self.gates:
            for q in gate.qubits:
                if not 0 <= q < self.n_qubits:
                    raise ValueError(
                        f"qubit index {q} out of range for {self.n_qubits} qubits"
                    )
            if gate.param_slot is not None:
                if not 0 <= gate.param_slot < self.n_param_slots:
                    raise ValueError(
                        f"slot {gate.param_slot} out of range "
                        f"[0, {self.n_param_slots})"
                    )
                if gate.param_slot in seen_slots:
                    raise ValueError(f"slot {gate.param_slot} referenced twice")
                seen_slots.add(gate.param_slot)

    def count_1q(self) -> int:
        return sum(1 for g in self.gates if len(g.qubits) == 1)

    def count_2q(self) -> int:
        return sum(1 for g in self.gates if len(g.qubits) == 2)


# ---------------------------------------------------------------------------
# kernels


def init_zero_state(n: int, max_qubits: int = DEFAULT_MAX_QUBITS) -> np.ndarray:
    """|0...0> on ``n`` qubits as a dense complex array."""
    if not 1 <= n <= max_qubits:
        raise ValueError(f"qubit count {n} outside [1, {max_qubits}]")
    state = np.zeros(1 << n, dtype=np.complex128)
    state[0] = 1.0
    return state


def _single_qubit_pair_view(state: np.ndarray, n: int, q: int) -> np.ndarray:
    # Exposes bit q as its own axis: (..., high, 2, low) with low = 2**q.
    return state.reshape(*state.shape[:-1], 1 << (n - 1 - q), 2, 1 << q)


def _apply_one_qubit(state, n, q, u00, u01, u10, u11):
    view = _single_qubit_pair_view(state, n, q)
    lo = view[..., 0, :].copy()
    hi = view[..., 1, :]
    view[..., 0, :] = u00 * lo + u01 * hi
    view[..., 1, :] = u10 * lo + u11 * hi
    return state


def _both_set_view(state: np.ndarray, n: int, qa: int, qb: int) -> np.ndarray:
    # Slice of amplitudes where both qubit bits are 1.
    hi_q, lo_q = max(qa, qb), min(qa, qb)
    view = state.reshape(
        *state.shape[:-1],
        1 << (n - 1 - hi_q),
        2,
        1 << (hi_q - 1 - lo_q),
        2,
        1 << lo_q,
    )
    return view[..., 1, :, 1, :]


def apply_pauli(state: np.ndarray, n: int, q: int, kind: str) -> np.ndarray:
    """Multiply the state in place by a single-qubit X, Y, or Z."""
    view = _single_qubit_pair_view(state, n, q)
    if kind == "Z":
        view[..., 1, :] *= -1.0
    elif kind == "X":
        lo = view[..., 0, :].copy()
        view[..., 0, :] = view[..., 1, :]
        view[..., 1, :] = lo
    elif kind == "Y":
        lo = view[..., 0, :].copy()
        view[..., 0, :] = -1j * view[..., 1, :]
        view[..., 1, :] = 1j * lo
    else:
        raise ValueError(f"not a Pauli kind: {kind!r}")
    return state


def apply_gate(
    state: np.ndarray, gate: GateInstance, angle: float | None = None, n: int | None = None
) -> np.ndarray:
    """Multiply the state in place by the gate unitary.

    ``angle`` is required for parameterized kinds and ignored for CZ.
    ``n`` defaults to the qubit count inferred from the state size.
    """
    if n is None:
        n = (state.shape[-1] - 1).bit_length()
    for q in gate.qubits:
        if not 0 <= q < n:
            raise ValueError(f"qubit index {q} out of range for {n} qubits")
    if gate.kind == "CZ":
        angle = np.pi
    elif angle is None:
        raise ValueError(f"{gate.kind} needs an angle")
    if gate.kind in ROTATION_KINDS:
        half = 0.5 * angle
        c, s = np.cos(half), np.sin(half)
        q = gate.qubits[0]
        if gate.kind == "RX":
            return _apply_one_qubit(state, n, q, c, -1j * s, -1j * s, c)
        if gate.kind == "RY":
            return _apply_one_qubit(state, n, q, c, -s, s, c)
        return _apply_one_qubit(state, n, q, complex(c, -s), 0.0, 0.0, complex(c, s))
    # CP / CZ: phase on the |11> subspace of the pair.
    _both_set_view(state, n, *gate.qubits)[...] *= np.exp(1j * angle)
    return state


def run(circuit: Circuit, angles: np.ndarray) -> np.ndarray:
    """Apply the circuit's gates in order to |0...0>."""
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape != (circuit.n_param_slots,):
        raise ValueError(
            f"expected {circuit.n_param_slots} angles, got shape {angles.shape}"
        )
    state = init_zero_state(circuit.n_qubits)
    for gate in circuit.gates:
        angle = None if gate.param_slot is None else angles[gate.param_slot]
        apply_gate(state, gate, angle, n=circuit.n_qubits)
    return state


# ---------------------------------------------------------------------------
# Pauli-sum expectation


@functools.lru_cache(maxsize=None)
def _pauli_string_action(paulis: str) -> tuple[np.ndarray, np.ndarray]:
    """(permutation, phase) realizing ``P|psi>`` for one Pauli string.

    ``(P psi)[j] = phase[j ^ mask] * psi[j ^ mask]`` where mask collects the
    X/Y positions; returned arrays are cached and must not be mutated.
    """
    n = len(paulis)
    dim = 1 << n
    idx = np.arange(dim)
    phase = np.ones(dim, dtype=np.complex128)
    mask = 0
    for q, p in enumerate(paulis):
        bit = (idx >> q) & 1
        if p == "X":
            mask |= 1 << q
        elif p == "Y":
            mask |= 1 << q
            phase = phase * (1j * (1.0 - 2.0 * bit))
        elif p == "Z":
            phase = phase * (1.0 - 2.0 * bit)
    perm = idx ^ mask
    return perm, phase


def apply_pauli_string(state: np.ndarray, paulis: str) -> np.ndarray:
    """Return ``P|psi>`` for a full Pauli string (new array)."""
    perm, phase = _pauli_string_action(paulis)
    return (phase * state)[..., perm]


def apply_hamiltonian(state: np.ndarray, h: Hamiltonian) -> np.ndarray:
    """Return ``H|psi>`` as a new array (batch-aware)."""
    _check_state_size(state, h)
    out = np.zeros_like(state)
    for term in h.terms:
        out += term.coefficient * apply_pauli_string(state, term.paulis)
    return out


def expectation(state: np.ndarray, h: Hamiltonian) -> float | np.ndarray:
    """Real energy ``<psi|H|psi>`` (scalar, or a vector for batched states).

    Raises if the accumulated imaginary residue exceeds ``IMAG_TOLERANCE``;
    a real residue beyond that indicates a non-Hermitian observable or a
    corrupted state.
    """
    _check_state_size(state, h)
    total = np.zeros(state.shape[:-1], dtype=np.complex128)
    conj = state.conj()
    for term in h.terms:
        total += term.coefficient * (conj * apply_pauli_string(state, term.paulis)).sum(
            axis=-1
        )
    residue = np.max(np.abs(total.imag)) if total.size else 0.0
    if residue > IMAG_TOLERANCE:
        raise ArithmeticError(f"imaginary expectation residue {residue:.3e}")
    if total.ndim == 0:
        return float(total.real)
    return total.real.copy()


def _check_state_size(state: np.ndarray, h: Hamiltonian) -> None:
    if state.shape[-1] != (1 << h.n_qubits):
        raise ValueError(
            f"state dimension {state.shape[-1]} does not match "
            f"{h.n_qubits}-qubit observable"
        )


# ---------------------------------------------------------------------------
# text serialization (reproducibility dumps)


def circuit_to_text(circuit: Circuit) -> str:
    """Line-oriented dump: a ``qubits N`` header, then one gate per line.

    Gate lines read ``KIND q`` or ``KIND q1,q2``, followed by ``slot=<k>``
    for parameterized gates.
    """
    lines = [f"qubits {circuit.n_qubits}"]
    for gate in circuit.gates:
        entry = f"{gate.kind} {','.join(str(q) for q in gate.qubits)}"
        if gate.param_slot is not None:
            entry += f" slot={gate.param_slot}"
        lines.append(entry)
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str) -> Circuit:
    """Parse :func:`circuit_to_text` output back into a circuit."""
    n_qubits = None
    gates: list[GateInstance] = []
    max_slot = -1
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "qubits":
            if n_qubits is not None:
                raise ValueError(f"line {lineno}: repeated qubits header")
            n_qubits = int(fields[1])
            continue
        if n_qubits is None:
            raise ValueError("missing 'qubits <n>' header line")
        kind = fields[0]
        qubits = tuple(int(q) for q in fields[1].split(","))
        slot = None
        if len(fields) > 2:
            key, _, value = fields[2].partition("=")
            if key != "slot":
                raise ValueError(f"line {lineno}: unexpected field {fields[2]!r}")
            slot = int(value)
            max_slot = max(max_slot, slot)
        gates.append(GateInstance(kind=kind, qubits=qubits, param_slot=slot))
    if n_qubits is None:
        raise ValueError("missing 'qubits <n>' header line")
    return Circuit(n_qubits=n_qubits, gates=tuple(gates), n_param_slots=max_slot + 1)
