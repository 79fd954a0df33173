"""Training loops: joint gate/architecture search, pruning, fine-tuning.

Stage 1 jointly trains the angles and the gating latents of an encoded
circuit with plain Adam on the energy; there is no sparsity penalty, so
any pruning pressure comes from the energy landscape itself. Pruning
thresholds the sigmoid activations; stage 2 fine-tunes the surviving
angles on the hard-pruned circuit. ``vanilla_vqe`` is the same fixed-
architecture loop started from random angles.

Noisy training: when a noise model is supplied, the per-epoch energy and
gradient come from a fresh batch of seeded Pauli-error trajectories (see
``noise.trajectory_energy_gradient``); everything stays deterministic for
a fixed seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .ansatz import GatedCircuit, GatedParams, init_gated_params
from .gradients import GradientVector, _adjoint_energy_gradient, chain_gating
from .hamiltonian import Hamiltonian
from .simulator import Circuit, GateInstance, ROTATION_KINDS


class DivergenceError(RuntimeError):
    """Raised when the energy or the parameters stop being finite."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for one optimization run."""

    method: str = "adam"
    learning_rate: float = 0.01
    epochs: int = 200
    seed: int = 0
    prune_threshold: float = 0.5

    def __post_init__(self):
        if self.method != "adam":
            raise ValueError(f"unsupported optimizer {self.method!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not 0.0 < self.prune_threshold < 1.0:
            raise ValueError("prune_threshold must lie in (0, 1)")


@dataclass
class TraceRecord:
    epoch: int
    energy: float
    grad_norm: float
    active_1q: int
    active_2q: int


@dataclass
class RunTrace:
    """Per-epoch observability record of one optimization run."""

    rows: list[TraceRecord] = field(default_factory=list)

    def append(self, epoch, energy, grad_norm, active_1q, active_2q) -> None:
        self.rows.append(TraceRecord(epoch, energy, grad_norm, active_1q, active_2q))

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.rows])

    @property
    def active_totals(self) -> np.ndarray:
        return np.array([r.active_1q + r.active_2q for r in self.rows])

    def write_csv(self, path, metadata: dict | None = None) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for key, value in (metadata or {}).items():
                fh.write(f"# {key}: {value}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "energy", "grad_norm", "active_1q", "active_2q"])
            for r in self.rows:
                writer.writerow([r.epoch, repr(r.energy), repr(r.grad_norm), r.active_1q, r.active_2q])


class Adam:
    """Classic Adam minimizer over a flat parameter vector."""

    def __init__(self, n: int, learning_rate: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, x: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def restrict(self, indices: np.ndarray, learning_rate: float) -> "Adam":
        """Moments for a surviving subset of parameters.

        Lets fine-tuning continue the search-phase optimization instead of
        re-accelerating from scratch after pruning.
        """
        child = Adam(len(indices), learning_rate, self.beta1, self.beta2, self.eps)
        child.m = self.m[indices].copy()
        child.v = self.v[indices].copy()
        child.t = self.t
        return child


def _check_finite(energy: float, x: np.ndarray, epoch: int) -> None:
    if not np.isfinite(energy):
        raise DivergenceError(f"non-finite energy {energy!r} at epoch {epoch}")
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"non-finite parameters at epoch {epoch}")


def _noisy_gradient_fn(circuit, h, noise_model, n_traj, seed_key):
    # Deferred import: noise builds on gradients, which sits below this module.
    from .noise import trajectory_energy_gradient

    def evaluate(angles, epoch):
        return trajectory_energy_gradient(
            circuit, angles, h, noise_model, n_traj, seed=(*seed_key, epoch)
        )

    return evaluate


@dataclass
class Stage1Result:
    params: GatedParams
    trace: RunTrace
    adam: Adam


def stage1_full(
    gc: GatedCircuit,
    h: Hamiltonian,
    cfg: OptimizerConfig,
    noise_model=None,
    n_traj: int = 200,
) -> Stage1Result:
    """Stage-1 search returning the optimizer state alongside the result."""
    if gc.base.n_qubits != h.n_qubits:
        raise ValueError("circuit and observable qubit counts differ")
    params = init_gated_params(gc, seed=[cfg.seed, 1])
    trace = RunTrace()
    n_r, n_e = gc.n_rotations, gc.n_entanglers
    x = np.concatenate([params.theta, params.rot_latents, params.ent_latents])
    adam = Adam(x.size, cfg.learning_rate)
    noisy = None
    if noise_model is not None and noise_model.is_active():
        noisy = _noisy_gradient_fn(gc.base, h, noise_model, n_traj, (cfg.seed, 2))
    for epoch in range(cfg.epochs):
        params = GatedParams(
            theta=x[:n_r],
            rot_latents=x[n_r : 2 * n_r],
            ent_latents=x[2 * n_r :],
            steepness=gc.steepness,
        )
        angles = gc.effective_angles(params)
        if noisy is None:
            energy, d_phi = _adjoint_energy_gradient(gc.base, h, angles)
        else:
            energy, d_phi = noisy(angles, epoch)
        grad = chain_gating(d_phi, params, gc).flat()
        _check_finite(energy, x, epoch)
        a1, a2 = params.active_counts(cfg.prune_threshold)
        trace.append(epoch, energy, float(np.linalg.norm(grad)), a1, a2)
        x = adam.step(x, grad)
    params = GatedParams(
        theta=x[:n_r],
        rot_latents=x[n_r : 2 * n_r],
        ent_latents=x[2 * n_r :],
        steepness=gc.steepness,
    )
    return Stage1Result(params=params, trace=trace, adam=adam)


def stage1(
    gc: GatedCircuit,
    h: Hamiltonian,
    cfg: OptimizerConfig,
    noise_model=None,
    n_traj: int = 200,
) -> tuple[GatedParams, RunTrace]:
    """Jointly optimize angles and gating latents on the energy.

    Returns the final parameters and the per-epoch trace. Angles start
    uniform on [0, 2*pi), latents start softly on; both are derived from
    ``cfg.seed``.
    """
    result = stage1_full(gc, h, cfg, noise_model=noise_model, n_traj=n_traj)
    return result.params, result.trace


def _prune_full(
    gc: GatedCircuit, params: GatedParams, tau: float
) -> tuple[Circuit, np.ndarray, np.ndarray]:
    """Prune plus the indices of surviving rotations (for optimizer carry)."""
    rot_act, ent_act = params.activations()
    gates: list[GateInstance] = []
    theta0: list[float] = []
    kept_rotations: list[int] = []
    slot = 0
    rot_i = 0
    ent_i = 0
    for gate in gc.base.gates:
        if gate.kind in ROTATION_KINDS:
            if rot_act[rot_i] >= tau:
                gates.append(
                    GateInstance(kind=gate.kind, qubits=gate.qubits, param_slot=slot)
                )
                theta0.append(float(params.theta[rot_i]))
                kept_rotations.append(rot_i)
                slot += 1
            rot_i += 1
        else:
            if ent_act[ent_i] >= tau:
                gates.append(GateInstance(kind="CZ", qubits=gate.qubits))
            ent_i += 1
    circuit = Circuit(n_qubits=gc.base.n_qubits, gates=tuple(gates), n_param_slots=slot)
    return (
        circuit,
        np.array(theta0, dtype=np.float64),
        np.array(kept_rotations, dtype=np.intp),
    )


def prune(
    gc: GatedCircuit, params: GatedParams, tau: float
) -> tuple[Circuit, np.ndarray]:
    """Hard-threshold the gating: keep gates whose activation reaches tau.

    Kept rotations carry their trained angle into the returned initial
    angle vector; kept entanglers snap back to fixed CZ gates. Gate order
    is preserved and slots are re-indexed densely.
    """
    circuit, theta0, _ = _prune_full(gc, params, tau)
    return circuit, theta0


def stage2(
    circuit: Circuit,
    theta0: np.ndarray,
    h: Hamiltonian,
    cfg: OptimizerConfig,
    noise_model=None,
    n_traj: int = 200,
    warm_adam: Adam | None = None,
) -> tuple[np.ndarray, float, RunTrace]:
    """Fixed-architecture fine-tuning of the angles.

    Returns the best-seen energy and the angles that produced it (under
    noise this is the best trajectory-mean estimate; callers wanting an
    independent estimate should re-evaluate the returned angles).
    ``warm_adam`` lets the search pipeline hand over its optimizer moments
    so fine-tuning continues rather than restarts.
    """
    if circuit.n_qubits != h.n_qubits:
        raise ValueError("circuit and observable qubit counts differ")
    x = np.asarray(theta0, dtype=np.float64).copy()
    if x.shape != (circuit.n_param_slots,):
        raise ValueError(
            f"expected {circuit.n_param_slots} initial angles, got {x.shape}"
        )
    n1, n2 = circuit.count_1q(), circuit.count_2q()
    trace = RunTrace()
    adam = warm_adam if warm_adam is not None else Adam(x.size, cfg.learning_rate)
    if adam.m.shape != x.shape:
        raise ValueError("warm optimizer state does not match the angle count")
    noisy = None
    if noise_model is not None and noise_model.is_active():
        noisy = _noisy_gradient_fn(circuit, h, noise_model, n_traj, (cfg.seed, 3))
    best_energy = np.inf
    best_x = x.copy()
    for epoch in range(cfg.epochs):
        if noisy is None:
            energy, grad = _adjoint_energy_gradient(circuit, h, x)
        else:
            energy, grad = noisy(x, epoch)
        _check_finite(energy, x, epoch)
        trace.append(epoch, energy, float(np.linalg.norm(grad)), n1, n2)
        if energy < best_energy:
            best_energy = energy
            best_x = x.copy()
        x = adam.step(x, grad)
    if cfg.epochs == 0:
        # No training requested: report the energy of the initial angles.
        if noisy is None:
            best_energy, _ = _adjoint_energy_gradient(circuit, h, x)
        else:
            best_energy, _ = noisy(x, 0)
        best_x = x.copy()
    return best_x, float(best_energy), trace


def vanilla_vqe(
    circuit: Circuit,
    h: Hamiltonian,
    cfg: OptimizerConfig,
    noise_model=None,
    n_traj: int = 200,
) -> tuple[np.ndarray, float, RunTrace]:
    """Plain VQE baseline: random angles, then the stage-2 loop."""
    from .ansatz import random_angles

    theta0 = random_angles(circuit.n_param_slots, seed=[cfg.seed, 1])
    return stage2(circuit, theta0, h, cfg, noise_model=noise_model, n_traj=n_traj)


@dataclass
class PipelineResult:
    """End-to-end search outcome: pruned circuit, tuned angles, traces."""

    circuit: Circuit
    angles: np.ndarray
    energy: float
    gated_params: GatedParams
    stage1_trace: RunTrace
    stage2_trace: RunTrace


def antibp_pipeline(
    gc: GatedCircuit,
    h: Hamiltonian,
    cfg1: OptimizerConfig,
    cfg2: OptimizerConfig,
    noise_model=None,
    n_traj: int = 200,
) -> PipelineResult:
    """Search, prune at ``cfg1.prune_threshold``, then fine-tune.

    Fine-tuning inherits the search phase's Adam moments for the surviving
    angles, so stage 2 continues the descent instead of re-accelerating
    from zero momentum after the pruning perturbation.
    """
    search = stage1_full(gc, h, cfg1, noise_model=noise_model, n_traj=n_traj)
    circuit, theta0, kept = _prune_full(gc, search.params, cfg1.prune_threshold)
    warm = search.adam.restrict(kept, cfg2.learning_rate)
    angles, energy, trace2 = stage2(
        circuit, theta0, h, cfg2,
        noise_model=noise_model, n_traj=n_traj, warm_adam=warm,
    )
    return PipelineResult(
        circuit=circuit,
        angles=angles,
        energy=energy,
        gated_params=search.params,
        stage1_trace=search.trace,
        stage2_trace=trace2,
    )
