"""antibp — statevector VQE with sigmoid-gated circuit architecture search.

Core pieces:

* :mod:`antibp.hamiltonian` — Pauli-sum observables, parsing, dense oracles
* :mod:`antibp.simulator` — statevector kernels, circuits, expectations
* :mod:`antibp.ansatz` — layered/random circuit families and gating
* :mod:`antibp.gradients` — adjoint differentiation and the gating chain rule
* :mod:`antibp.optimize` — the two-stage search, pruning, and baselines
* :mod:`antibp.noise` — depolarizing trajectories and the exact oracle
* :mod:`antibp.experiments` / :mod:`antibp.cli` — the experiment harness
"""

__version__ = "0.1.0"

from .ansatz import (
    GatedCircuit,
    GatedParams,
    antibp_encode,
    identity_block,
    init_gated_params,
    random_angles,
    random_layered,
    random_prune,
)
from .gradients import (
    GradientVector,
    adjoint_gradient,
    chain_gating,
    finite_diff_gradient,
    gated_energy_gradient,
)
from .hamiltonian import (
    Hamiltonian,
    PauliTerm,
    dense_matrix,
    exact_ground_energy,
    load_hamiltonian,
    parse_hamiltonian,
    save_hamiltonian,
    serialize_hamiltonian,
    tfim,
)
from .noise import (
    NoiseModel,
    density_matrix_expectation,
    noisy_expectation,
    noisy_gradient,
    sample_trajectory,
    trajectory_energy_gradient,
)
from .optimize import (
    Adam,
    DivergenceError,
    OptimizerConfig,
    RunTrace,
    prune,
    stage1,
    stage2,
    vanilla_vqe,
)
from .simulator import (
    Circuit,
    GateInstance,
    apply_gate,
    apply_hamiltonian,
    circuit_from_text,
    circuit_to_text,
    expectation,
    init_zero_state,
    run,
)

__all__ = [
    "__version__",
    "Adam",
    "Circuit",
    "DivergenceError",
    "GateInstance",
    "GatedCircuit",
    "GatedParams",
    "GradientVector",
    "Hamiltonian",
    "NoiseModel",
    "OptimizerConfig",
    "PauliTerm",
    "RunTrace",
    "adjoint_gradient",
    "antibp_encode",
    "apply_gate",
    "apply_hamiltonian",
    "chain_gating",
    "circuit_from_text",
    "circuit_to_text",
    "dense_matrix",
    "density_matrix_expectation",
    "exact_ground_energy",
    "expectation",
    "finite_diff_gradient",
    "gated_energy_gradient",
    "identity_block",
    "init_gated_params",
    "init_zero_state",
    "load_hamiltonian",
    "noisy_expectation",
    "noisy_gradient",
    "parse_hamiltonian",
    "prune",
    "random_angles",
    "random_layered",
    "random_prune",
    "run",
    "sample_trajectory",
    "save_hamiltonian",
    "serialize_hamiltonian",
    "stage1",
    "stage2",
    "tfim",
    "trajectory_energy_gradient",
    "vanilla_vqe",
]
