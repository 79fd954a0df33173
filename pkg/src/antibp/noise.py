"""Depolarizing noise: Pauli-error trajectories and an exact oracle.

The sampled model inserts, after each gate and for each qubit the gate
touches, a uniformly random Pauli from {X, Y, Z} with the configured
probability. Every inserted error is unitary, so single trajectories stay
normalized; averaging trajectory energies estimates the depolarizing
channel ``rho -> (1-p) rho + (p/3) sum_P P rho P``, for which a noisy
identity gate damps ``<Z>`` by exactly ``1 - 4p/3``.

Trajectory ``i`` of an ``n_traj`` ensemble draws from its own generator
seeded by ``(seed, i)``; the draw order per trajectory is fixed (all
insertion coin flips for the whole circuit first, then the Pauli choices),
which makes the sequential sampler and the batched evaluator produce
bit-identical trajectories.

``trajectory_energy_gradient`` differentiates the trajectory-mean energy
exactly: each sampled trajectory is an ordinary unitary circuit, so one
batched adjoint sweep yields the same estimator that central differences
with common random numbers approach as the step vanishes, at a cost
independent of the parameter count.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .gradients import generator_overlap
from .hamiltonian import PAULI_MATRICES, Hamiltonian, dense_matrix
from .simulator import (
    Circuit,
    GateInstance,
    ROTATION_KINDS,
    apply_gate,
    apply_hamiltonian,
    apply_pauli,
    expectation,
)

_PAULI_KINDS = ("X", "Y", "Z")

# Density matrices are 4^n; keep the exact oracle to small registers.
DENSITY_QUBIT_LIMIT = 6

# Cap on amplitudes held at once when batching trajectories (~32 MiB).
_BATCH_ELEMENT_BUDGET = 1 << 21


@dataclass(frozen=True)
class NoiseModel:
    """Per-gate depolarizing probabilities.

    ``p_1q`` applies to the qubit of each rotation; ``p_2q`` applies
    independently to each qubit touched by a two-qubit gate.
    """

    p_1q: float = 0.0
    p_2q: float = 0.0

    def __post_init__(self):
        for name, p in (("p_1q", self.p_1q), ("p_2q", self.p_2q)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")

    def is_active(self) -> bool:
        return self.p_1q > 0.0 or self.p_2q > 0.0

    def gate_probability(self, gate: GateInstance) -> float:
        return self.p_1q if gate.kind in ROTATION_KINDS else self.p_2q


def _seed_list(seed) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


def _touch_list(circuit: Circuit, nm: NoiseModel) -> list[tuple[int, int, float]]:
    """Ordered (gate_index, qubit, probability) noise opportunities."""
    touches = []
    for gi, gate in enumerate(circuit.gates):
        p = nm.gate_probability(gate)
        for q in gate.qubits:
            touches.append((gi, q, p))
    return touches


def _draw_insertions(
    rng: np.random.Generator, touches: list[tuple[int, int, float]]
) -> list[tuple[int, int, str]]:
    """Sample (gate_index, qubit, pauli) insertions for one trajectory.

    Two bulk draws per trajectory: one uniform per touch opportunity, then
    one Pauli choice per hit, assigned in touch order.
    """
    if not touches:
        return []
    u = rng.random(len(touches))
    probs = np.array([t[2] for t in touches])
    hits = np.flatnonzero(u < probs)
    if hits.size == 0:
        return []
    kinds = rng.integers(0, 3, size=hits.size)
    return [
        (touches[h][0], touches[h][1], _PAULI_KINDS[k])
        for h, k in zip(hits, kinds)
    ]


def sample_trajectory(
    circuit: Circuit,
    angles: np.ndarray,
    nm: NoiseModel,
    rng: np.random.Generator,
) -> np.ndarray:
    """Run one noisy trajectory and return its (normalized) statevector."""
    from .simulator import init_zero_state

    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape != (circuit.n_param_slots,):
        raise ValueError(
            f"expected {circuit.n_param_slots} angles, got shape {angles.shape}"
        )
    insertions = _draw_insertions(rng, _touch_list(circuit, nm))
    by_gate: dict[int, list[tuple[int, str]]] = {}
    for gi, q, kind in insertions:
        by_gate.setdefault(gi, []).append((q, kind))
    n = circuit.n_qubits
    state = init_zero_state(n)
    for gi, gate in enumerate(circuit.gates):
        angle = None if gate.param_slot is None else angles[gate.param_slot]
        apply_gate(state, gate, angle, n=n)
        for q, kind in by_gate.get(gi, ()):
            apply_pauli(state, n, q, kind)
    return state


def _batch_insertions(
    circuit: Circuit, nm: NoiseModel, seed, n_traj: int, offset: int = 0
):
    """Per-gate insertion lists for trajectories [offset, offset + n_traj).

    Returns ``by_gate[gate_index] -> list of (row, qubit, pauli)`` with row
    relative to the batch.
    """
    base = _seed_list(seed)
    touches = _touch_list(circuit, nm)
    by_gate: dict[int, list[tuple[int, int, str]]] = {}
    for row in range(n_traj):
        rng = np.random.default_rng([*base, offset + row])
        for gi, q, kind in _draw_insertions(rng, touches):
            by_gate.setdefault(gi, []).append((row, q, kind))
    return by_gate


def _run_batch(circuit, angles, by_gate, n_traj):
    """Forward-simulate a batch of trajectories; returns (n_traj, dim)."""
    n = circuit.n_qubits
    states = np.zeros((n_traj, 1 << n), dtype=np.complex128)
    states[:, 0] = 1.0
    for gi, gate in enumerate(circuit.gates):
        angle = None if gate.param_slot is None else angles[gate.param_slot]
        apply_gate(states, gate, angle, n=n)
        for row, q, kind in by_gate.get(gi, ()):
            apply_pauli(states[row], n, q, kind)
    return states


def _trajectory_energies(
    circuit: Circuit, angles: np.ndarray, h: Hamiltonian, nm: NoiseModel,
    n_traj: int, seed,
) -> np.ndarray:
    """Per-trajectory energies, chunked to bound memory."""
    angles = np.asarray(angles, dtype=np.float64)
    dim = 1 << circuit.n_qubits
    chunk = max(1, _BATCH_ELEMENT_BUDGET // dim)
    energies = np.empty(n_traj)
    done = 0
    while done < n_traj:
        size = min(chunk, n_traj - done)
        by_gate = _batch_insertions(circuit, nm, seed, size, offset=done)
        states = _run_batch(circuit, angles, by_gate, size)
        energies[done : done + size] = expectation(states, h)
        done += size
    return energies


def noisy_expectation(
    circuit: Circuit,
    angles: np.ndarray,
    h: Hamiltonian,
    nm: NoiseModel,
    n_traj: int,
    seed,
) -> tuple[float, float]:
    """Trajectory-mean energy and its standard error."""
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    energies = _trajectory_energies(circuit, angles, h, nm, n_traj, seed)
    mean = float(np.mean(energies))
    stderr = float(np.std(energies, ddof=1) / np.sqrt(n_traj)) if n_traj > 1 else 0.0
    return mean, stderr


def trajectory_energy_gradient(
    circuit: Circuit,
    angles: np.ndarray,
    h: Hamiltonian,
    nm: NoiseModel,
    n_traj: int,
    seed,
) -> tuple[float, np.ndarray]:
    """Mean energy and exact dE/dphi of the fixed-trajectory ensemble.

    One batched forward + adjoint sweep over all trajectories; insertions
    are unitary gates inside each trajectory and are peeled off in reverse
    order during the backward pass.
    """
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape != (circuit.n_param_slots,):
        raise ValueError(
            f"expected {circuit.n_param_slots} angles, got shape {angles.shape}"
        )
    n = circuit.n_qubits
    dim = 1 << n
    chunk = max(1, _BATCH_ELEMENT_BUDGET // (2 * dim))
    grads = np.zeros(circuit.n_param_slots)
    energy_sum = 0.0
    done = 0
    while done < n_traj:
        size = min(chunk, n_traj - done)
        by_gate = _batch_insertions(circuit, nm, seed, size, offset=done)
        ket = _run_batch(circuit, angles, by_gate, size)
        bra = apply_hamiltonian(ket, h)
        energy_sum += float((ket.conj() * bra).sum(axis=-1).real.sum())
        for gi in range(len(circuit.gates) - 1, -1, -1):
            gate = circuit.gates[gi]
            for row, q, kind in reversed(by_gate.get(gi, ())):
                apply_pauli(ket[row], n, q, kind)  # Paulis are self-inverse
                apply_pauli(bra[row], n, q, kind)
            angle = np.pi if gate.param_slot is None else angles[gate.param_slot]
            if gate.param_slot is not None:
                grads[gate.param_slot] += float(
                    np.sum(generator_overlap(gate, bra, ket, n))
                )
            apply_gate(ket, gate, -angle, n=n)
            apply_gate(bra, gate, -angle, n=n)
        done += size
    return energy_sum / n_traj, grads / n_traj


def noisy_gradient(
    circuit: Circuit,
    angles: np.ndarray,
    h: Hamiltonian,
    nm: NoiseModel,
    n_traj: int,
    seed,
    step: float = 1e-3,
    common_random_numbers: bool = True,
) -> np.ndarray:
    """Central finite differences of the trajectory-mean energy.

    With common random numbers (the default) every +/- evaluation reuses
    the same trajectory seed set, cancelling most sampling variance; the
    independent mode exists to measure that effect.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    angles = np.asarray(angles, dtype=np.float64)
    grad = np.zeros(circuit.n_param_slots)
    base = _seed_list(seed)
    eval_count = 0
    for i in range(circuit.n_param_slots):
        shifted = angles.copy()
        values = []
        for sign in (+1.0, -1.0):
            shifted[i] = angles[i] + sign * step
            eval_seed = base if common_random_numbers else [*base, 997, eval_count]
            values.append(
                noisy_expectation(circuit, shifted, h, nm, n_traj, eval_seed)[0]
            )
            eval_count += 1
        grad[i] = (values[0] - values[1]) / (2.0 * step)
    return grad


# ---------------------------------------------------------------------------
# exact density-matrix oracle


@functools.lru_cache(maxsize=None)
def _embedded_pauli(n: int, q: int, kind: str) -> np.ndarray:
    mat = np.array([[1.0 + 0.0j]])
    for i in reversed(range(n)):
        mat = np.kron(mat, PAULI_MATRICES[kind] if i == q else PAULI_MATRICES["I"])
    return mat


def _dense_gate_unitary(gate: GateInstance, angle: float | None, n: int) -> np.ndarray:
    if gate.kind == "CZ":
        angle = np.pi
    if gate.kind in ROTATION_KINDS:
        half = 0.5 * angle
        c, s = np.cos(half), np.sin(half)
        if gate.kind == "RX":
            u = np.array([[c, -1j * s], [-1j * s, c]])
        elif gate.kind == "RY":
            u = np.array([[c, -s], [s, c]], dtype=np.complex128)
        else:
            u = np.array([[complex(c, -s), 0.0], [0.0, complex(c, s)]])
        mat = np.array([[1.0 + 0.0j]])
        for i in reversed(range(n)):
            mat = np.kron(mat, u if i == gate.qubits[0] else PAULI_MATRICES["I"])
        return mat
    # CP / CZ
    dim = 1 << n
    idx = np.arange(dim)
    qa, qb = gate.qubits
    both = ((idx >> qa) & 1) & ((idx >> qb) & 1)
    diag = np.where(both == 1, np.exp(1j * angle), 1.0 + 0.0j)
    return np.diag(diag)


def density_matrix_expectation(
    circuit: Circuit, angles: np.ndarray, h: Hamiltonian, nm: NoiseModel
) -> float:
    """Exact noisy energy via full density-matrix evolution.

    Applies each gate as a unitary conjugation, then the per-qubit
    depolarizing channel on each touched qubit. Only feasible for small
    registers (4^n matrix entries); serves as the unbiasedness oracle for
    the trajectory sampler.
    """
    n = circuit.n_qubits
    if n > DENSITY_QUBIT_LIMIT:
        raise ValueError(
            f"density-matrix oracle limited to {DENSITY_QUBIT_LIMIT} qubits, got {n}"
        )
    if circuit.n_qubits != h.n_qubits:
        raise ValueError("circuit and observable qubit counts differ")
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape != (circuit.n_param_slots,):
        raise ValueError(
            f"expected {circuit.n_param_slots} angles, got shape {angles.shape}"
        )
    dim = 1 << n
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[0, 0] = 1.0
    for gate in circuit.gates:
        angle = None if gate.param_slot is None else angles[gate.param_slot]
        u = _dense_gate_unitary(gate, angle, n)
        rho = u @ rho @ u.conj().T
        p = nm.gate_probability(gate)
        if p > 0.0:
            for q in gate.qubits:
                mixed = np.zeros_like(rho)
                for kind in _PAULI_KINDS:
                    pq = _embedded_pauli(n, q, kind)
                    mixed += pq @ rho @ pq
                rho = (1.0 - p) * rho + (p / 3.0) * mixed
    return float(np.trace(dense_matrix(h) @ rho).real)
