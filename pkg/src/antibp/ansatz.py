"""Circuit families: random layered ansatz, identity-block variant,
sigmoid-gated encoding, and random pruning.

The layered ansatz follows the usual hardware-efficient pattern: one
uniformly drawn rotation (RX/RY/RZ) per qubit per layer, then CZ gates on
adjacent pairs. "Depth" counts (rotation layer + entangling layer) blocks,
so a depth-d circuit on n qubits has ``n*d`` rotations and ``(n-1)*d``
entanglers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .simulator import Circuit, GateInstance, ROTATION_KINDS

DEFAULT_STEEPNESS = 50.0

# Raw latent value whose activation sits just below 1 (expit(50*0.1) ~ 0.9933):
# close enough to "fully on" while keeping a usable sigmoid gradient.
DEFAULT_LATENT_INIT = 0.1


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_layered(n: int, depth: int, seed) -> Circuit:
    """Seeded random layered circuit: n*depth rotations, (n-1)*depth CZs."""
    if n < 2:
        raise ValueError(f"layered ansatz needs at least 2 qubits, got {n}")
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    rng = _as_rng(seed)
    gates: list[GateInstance] = []
    slot = 0
    for _ in range(depth):
        kinds = rng.integers(0, 3, size=n)
        for q in range(n):
            gates.append(
                GateInstance(kind=ROTATION_KINDS[kinds[q]], qubits=(q,), param_slot=slot)
            )
            slot += 1
        for q in range(n - 1):
            gates.append(GateInstance(kind="CZ", qubits=(q, q + 1)))
    return Circuit(n_qubits=n, gates=tuple(gates), n_param_slots=slot)


def random_angles(n_slots: int, seed) -> np.ndarray:
    """Initial rotation angles, uniform on [0, 2*pi) per slot."""
    rng = _as_rng(seed)
    return rng.uniform(0.0, 2.0 * np.pi, size=n_slots)


def identity_block(circuit: Circuit, theta: np.ndarray) -> tuple[Circuit, np.ndarray]:
    """Append the inverse gate sequence so the whole circuit starts as identity.

    The mirrored half gets fresh parameter slots whose initial angles are
    the negatives of their partners, so both halves train independently
    while the composite evaluates to the identity at initialization. Gate
    counts exactly double.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (circuit.n_param_slots,):
        raise ValueError(
            f"expected {circuit.n_param_slots} angles, got shape {theta.shape}"
        )
    for gate in circuit.gates:
        if gate.kind not in ROTATION_KINDS and gate.kind != "CZ":
            raise ValueError(f"unsupported gate kind for identity block: {gate.kind}")
    gates = list(circuit.gates)
    mirror_angles: list[float] = []
    slot = circuit.n_param_slots
    for gate in reversed(circuit.gates):
        if gate.kind == "CZ":
            gates.append(gate)  # self-inverse
            continue
        gates.append(GateInstance(kind=gate.kind, qubits=gate.qubits, param_slot=slot))
        mirror_angles.append(-theta[gate.param_slot])
        slot += 1
    full_theta = np.concatenate([theta, np.array(mirror_angles, dtype=np.float64)])
    return (
        Circuit(n_qubits=circuit.n_qubits, gates=tuple(gates), n_param_slots=slot),
        full_theta,
    )


@dataclass(frozen=True)
class GatedCircuit:
    """A circuit whose every gate is controlled by a steep-sigmoid latent.

    Rotation i (in gate order) occupies effective-angle slot i and computes
    ``phi = expit(steepness * rot_latent[i]) * theta[i]``; entangler j
    occupies slot ``n_rotations + j`` as a CP gate with
    ``phi = pi * expit(steepness * ent_latent[j])``. ``original_slots``
    records each rotation's slot in the pre-encoding circuit so angle
    vectors can be carried across.
    """

    base: Circuit
    n_rotations: int
    n_entanglers: int
    original_slots: tuple[int, ...]
    steepness: float = DEFAULT_STEEPNESS

    def __post_init__(self):
        if self.steepness <= 0:
            raise ValueError("steepness must be positive")
        rot_seen = 0
        ent_seen = 0
        for gate in self.base.gates:
            if gate.kind in ROTATION_KINDS:
                if gate.param_slot != rot_seen:
                    raise ValueError("rotation slots must be dense in gate order")
                rot_seen += 1
            elif gate.kind == "CP":
                if gate.param_slot != self.n_rotations + ent_seen:
                    raise ValueError("entangler slots must follow rotation slots")
                ent_seen += 1
            else:
                raise ValueError(f"gated circuit cannot contain {gate.kind}")
        if rot_seen != self.n_rotations or ent_seen != self.n_entanglers:
            raise ValueError("gate counts do not match the declared layout")

    def effective_angles(self, params: "GatedParams") -> np.ndarray:
        """Map (theta, latents) to the angles fed to the simulator."""
        rot_act, ent_act = params.activations()
        return np.concatenate([rot_act * params.theta, np.pi * ent_act])

    def theta_from_circuit_angles(self, angles: np.ndarray) -> np.ndarray:
        """Reorder a pre-encoding angle vector into rotation-gate order."""
        angles = np.asarray(angles, dtype=np.float64)
        return angles[list(self.original_slots)]


@dataclass
class GatedParams:
    """Trainable state of a gated circuit: angles plus gate latents."""

    theta: np.ndarray
    rot_latents: np.ndarray
    ent_latents: np.ndarray
    steepness: float = DEFAULT_STEEPNESS

    def __post_init__(self):
        if self.steepness <= 0:
            raise ValueError("steepness must be positive")
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.rot_latents = np.asarray(self.rot_latents, dtype=np.float64)
        self.ent_latents = np.asarray(self.ent_latents, dtype=np.float64)
        if self.theta.shape != self.rot_latents.shape:
            raise ValueError("theta and rotation latents must have equal length")

    def activations(self) -> tuple[np.ndarray, np.ndarray]:
        """Sigmoid gate activations for rotations and entanglers."""
        return (
            expit(self.steepness * self.rot_latents),
            expit(self.steepness * self.ent_latents),
        )

    def active_counts(self, threshold: float) -> tuple[int, int]:
        """Number of gates whose activation reaches the keep threshold."""
        rot_act, ent_act = self.activations()
        return int(np.sum(rot_act >= threshold)), int(np.sum(ent_act >= threshold))

    def copy(self) -> "GatedParams":
        return GatedParams(
            theta=self.theta.copy(),
            rot_latents=self.rot_latents.copy(),
            ent_latents=self.ent_latents.copy(),
            steepness=self.steepness,
        )


def antibp_encode(circuit: Circuit, steepness: float = DEFAULT_STEEPNESS) -> GatedCircuit:
    """Attach a gating latent to every gate of a rotation/CZ circuit.

    Rotations keep their kind and qubit but are re-slotted into gate order;
    each CZ becomes a CP entangler whose angle the gating controls. Gate
    order and qubit assignments are preserved.
    """
    gates: list[GateInstance] = []
    original_slots: list[int] = []
    n_rot = sum(1 for g in circuit.gates if g.kind in ROTATION_KINDS)
    rot_i = 0
    ent_i = 0
    for gate in circuit.gates:
        if gate.kind in ROTATION_KINDS:
            gates.append(GateInstance(kind=gate.kind, qubits=gate.qubits, param_slot=rot_i))
            original_slots.append(gate.param_slot)
            rot_i += 1
        elif gate.kind == "CZ":
            gates.append(
                GateInstance(kind="CP", qubits=gate.qubits, param_slot=n_rot + ent_i)
            )
            ent_i += 1
        else:
            raise ValueError(f"unsupported gate kind for gating: {gate.kind}")
    base = Circuit(
        n_qubits=circuit.n_qubits, gates=tuple(gates), n_param_slots=rot_i + ent_i
    )
    return GatedCircuit(
        base=base,
        n_rotations=rot_i,
        n_entanglers=ent_i,
        original_slots=tuple(original_slots),
        steepness=steepness,
    )


def init_gated_params(
    gc: GatedCircuit, seed, latent_init: float = DEFAULT_LATENT_INIT
) -> GatedParams:
    """Random angles, all gates initialized (softly) on."""
    rng = _as_rng(seed)
    return GatedParams(
        theta=rng.uniform(0.0, 2.0 * np.pi, size=gc.n_rotations),
        rot_latents=np.full(gc.n_rotations, latent_init),
        ent_latents=np.full(gc.n_entanglers, latent_init),
        steepness=gc.steepness,
    )


def random_prune(circuit: Circuit, keep_1q: int, keep_2q: int, seed) -> Circuit:
    """Keep a uniformly random subset of rotations and entanglers.

    Original gate order is preserved and parameter slots are re-indexed
    densely. Used by the ablation arm that matches a searched circuit's
    gate counts without its gate selection.
    """
    rot_positions = [i for i, g in enumerate(circuit.gates) if len(g.qubits) == 1]
    ent_positions = [i for i, g in enumerate(circuit.gates) if len(g.qubits) == 2]
    if keep_1q > len(rot_positions):
        raise ValueError(
            f"keep_1q={keep_1q} exceeds available {len(rot_positions)} rotations"
        )
    if keep_2q > len(ent_positions):
        raise ValueError(
            f"keep_2q={keep_2q} exceeds available {len(ent_positions)} entanglers"
        )
    rng = _as_rng(seed)
    kept = set(rng.choice(rot_positions, size=keep_1q, replace=False))
    kept |= set(rng.choice(ent_positions, size=keep_2q, replace=False))
    gates: list[GateInstance] = []
    slot = 0
    for i, gate in enumerate(circuit.gates):
        if i not in kept:
            continue
        if gate.param_slot is None:
            gates.append(gate)
        else:
            gates.append(GateInstance(kind=gate.kind, qubits=gate.qubits, param_slot=slot))
            slot += 1
    return Circuit(n_qubits=circuit.n_qubits, gates=tuple(gates), n_param_slots=slot)
