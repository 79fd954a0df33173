"""Experiment harness: configs, method runners, sweeps, and CSV export.

All outputs are deterministic for a fixed config: every run derives its
randomness from ``(seed, purpose)`` keys, CSV files carry no timestamps,
and files are written atomically. Each CSV starts with a ``#`` metadata
comment block (seeds, config hash, artifact version) followed by a header
row.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import __version__
from .ansatz import antibp_encode, identity_block, random_angles, random_layered, random_prune
from .gradients import adjoint_gradient
from .hamiltonian import (
    DENSE_QUBIT_LIMIT,
    Hamiltonian,
    exact_ground_energy,
    load_hamiltonian,
)
from .noise import NoiseModel, noisy_expectation
from .optimize import (
    OptimizerConfig,
    RunTrace,
    antibp_pipeline,
    stage2,
    vanilla_vqe,
)
from .simulator import Circuit, circuit_to_text, expectation, init_zero_state

METHODS = ("vanilla", "idblock", "antibp", "randomprune")


class ConfigError(ValueError):
    """Invalid configuration file, key, or value."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved settings for one experiment invocation."""

    hamiltonian: str = ""
    depth: int = 10
    method: str = "antibp"
    name: str = ""
    learning_rate: float = 0.01
    stage1_epochs: int = 200
    stage2_epochs: int = 300
    prune_threshold: float = 0.5
    steepness: float = 50.0
    noise_p1q: float = 0.0
    noise_p2q: float = 0.0
    trajectories: int = 200
    eval_trajectories: int = 2000
    seeds: tuple[int, ...] = (0,)
    out_dir: str = "runs"
    keep_1q: int = -1
    keep_2q: int = -1
    methods: tuple[str, ...] = ("vanilla", "idblock", "antibp")
    depths: tuple[int, ...] = ()
    gradvar_samples: int = 200
    gradvar_component: int = 0

    def noise_model(self) -> NoiseModel:
        return NoiseModel(p_1q=self.noise_p1q, p_2q=self.noise_p2q)

    def config_hash(self) -> str:
        payload = "\n".join(
            f"{key}={value!r}" for key, value in sorted(asdict(self).items())
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _parse_int_list(text: str) -> tuple[int, ...]:
    items = [s for s in text.replace(",", " ").split() if s]
    return tuple(int(s) for s in items)


def _parse_str_list(text: str) -> tuple[str, ...]:
    return tuple(s for s in text.replace(",", " ").split() if s)


# config-file key -> (dataclass field, parser)
_CONFIG_KEYS = {
    "hamiltonian": ("hamiltonian", str),
    "depth": ("depth", int),
    "method": ("method", str),
    "name": ("name", str),
    "out_dir": ("out_dir", str),
    "seeds": ("seeds", _parse_int_list),
    "methods": ("methods", _parse_str_list),
    "depths": ("depths", _parse_int_list),
    "keep_1q": ("keep_1q", int),
    "keep_2q": ("keep_2q", int),
    "optimizer.learning_rate": ("learning_rate", float),
    "optimizer.stage1_epochs": ("stage1_epochs", int),
    "optimizer.stage2_epochs": ("stage2_epochs", int),
    "prune.threshold": ("prune_threshold", float),
    "gating.steepness": ("steepness", float),
    "noise.p1q": ("noise_p1q", float),
    "noise.p2q": ("noise_p2q", float),
    "noise.trajectories": ("trajectories", int),
    "noise.eval_trajectories": ("eval_trajectories", int),
    "gradvar.samples": ("gradvar_samples", int),
    "gradvar.component": ("gradvar_component", int),
}


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines with ``#`` comments."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        values[key.strip()] = value.strip()
    return values


def build_config(
    file_path: str | None = None, overrides: dict[str, str] | None = None
) -> ExperimentConfig:
    """Merge config-file values and CLI overrides into a config."""
    merged: dict[str, str] = {}
    if file_path:
        try:
            with open(file_path, "r", encoding="utf-8") as fh:
                merged.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    merged.update(overrides or {})
    kwargs = {}
    for key, raw_value in merged.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        field_name, parser = _CONFIG_KEYS[key]
        try:
            kwargs[field_name] = parser(raw_value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw_value!r}") from exc
    cfg = ExperimentConfig(**kwargs)
    if cfg.method not in METHODS:
        raise ConfigError(f"unknown method {cfg.method!r}; choose from {METHODS}")
    for m in cfg.methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
    if not cfg.seeds:
        raise ConfigError("at least one seed is required")
    if not cfg.name and cfg.hamiltonian:
        stem = os.path.splitext(os.path.basename(cfg.hamiltonian))[0]
        cfg = replace(cfg, name=stem)
    return cfg


def load_problem(cfg: ExperimentConfig) -> Hamiltonian:
    if not cfg.hamiltonian:
        raise ConfigError("no Hamiltonian file configured (key 'hamiltonian')")
    try:
        return load_hamiltonian(cfg.hamiltonian)
    except OSError as exc:
        raise ConfigError(f"cannot read Hamiltonian: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"bad Hamiltonian file: {exc}") from exc


def reference_energy(h: Hamiltonian) -> float:
    """Ground-state reference: dense eigensolver, Lanczos beyond its limit."""
    if h.n_qubits <= DENSE_QUBIT_LIMIT:
        return exact_ground_energy(h)
    from scipy.sparse.linalg import LinearOperator, eigsh

    from .simulator import apply_hamiltonian

    dim = 1 << h.n_qubits
    op = LinearOperator(
        (dim, dim), matvec=lambda v: apply_hamiltonian(v.astype(np.complex128), h)
    )
    v0 = np.full(dim, 1.0 / np.sqrt(dim))
    return float(eigsh(op, k=1, which="SA", v0=v0)[0][0])


# ---------------------------------------------------------------------------
# method runners


@dataclass
class MethodRunResult:
    method: str
    seed: int
    circuit: Circuit
    angles: np.ndarray
    energy: float
    n_1q: int
    n_2q: int
    orig_1q: int
    orig_2q: int
    traces: dict[str, RunTrace]


def _final_energy(circuit, angles, h, nm, cfg, seed) -> float | None:
    """Independent noisy re-evaluation of the chosen angles (noisy runs only)."""
    if not nm.is_active():
        return None
    return noisy_expectation(
        circuit, angles, h, nm, cfg.eval_trajectories, seed=[seed, 9]
    )[0]


def run_method(
    h: Hamiltonian,
    cfg: ExperimentConfig,
    method: str,
    seed: int,
    keep_counts: tuple[int, int] | None = None,
) -> MethodRunResult:
    """Execute one method for one seed and report its achieved energy.

    Noiseless runs report the best energy seen during training; noisy runs
    re-evaluate the returned angles with ``cfg.eval_trajectories``
    independent trajectories.
    """
    nm = cfg.noise_model()
    base = random_layered(h.n_qubits, cfg.depth, seed=[seed, 0])
    orig_1q, orig_2q = base.count_1q(), base.count_2q()

    if method == "vanilla":
        opt = OptimizerConfig(
            learning_rate=cfg.learning_rate, epochs=cfg.stage2_epochs, seed=seed,
            prune_threshold=cfg.prune_threshold,
        )
        angles, energy, trace = vanilla_vqe(
            base, h, opt, noise_model=nm, n_traj=cfg.trajectories
        )
        circuit = base
        traces = {"train": trace}
    elif method == "idblock":
        half = random_angles(base.n_param_slots, seed=[seed, 1])
        circuit, theta0 = identity_block(base, half)
        opt = OptimizerConfig(
            learning_rate=cfg.learning_rate, epochs=cfg.stage2_epochs, seed=seed,
            prune_threshold=cfg.prune_threshold,
        )
        angles, energy, trace = stage2(
            circuit, theta0, h, opt, noise_model=nm, n_traj=cfg.trajectories
        )
        traces = {"train": trace}
    elif method == "antibp":
        gc = antibp_encode(base, steepness=cfg.steepness)
        opt1 = OptimizerConfig(
            learning_rate=cfg.learning_rate, epochs=cfg.stage1_epochs, seed=seed,
            prune_threshold=cfg.prune_threshold,
        )
        opt2 = OptimizerConfig(
            learning_rate=cfg.learning_rate, epochs=cfg.stage2_epochs, seed=seed,
            prune_threshold=cfg.prune_threshold,
        )
        pipeline = antibp_pipeline(gc, h, opt1, opt2, noise_model=nm, n_traj=cfg.trajectories)
        circuit = pipeline.circuit
        angles = pipeline.angles
        energy = pipeline.energy
        traces = {"stage1": pipeline.stage1_trace, "stage2": pipeline.stage2_trace}
    elif method == "randomprune":
        if keep_counts is None:
            if cfg.keep_1q < 0 or cfg.keep_2q < 0:
                raise ConfigError(
                    "randomprune needs keep_1q/keep_2q or a reference antibp run"
                )
            keep_counts = (cfg.keep_1q, cfg.keep_2q)
        circuit = random_prune(base, keep_counts[0], keep_counts[1], seed=[seed, 3])
        theta0 = random_angles(circuit.n_param_slots, seed=[seed, 1])
        opt = OptimizerConfig(
            learning_rate=cfg.learning_rate, epochs=cfg.stage2_epochs, seed=seed,
            prune_threshold=cfg.prune_threshold,
        )
        angles, energy, trace = stage2(
            circuit, theta0, h, opt, noise_model=nm, n_traj=cfg.trajectories
        )
        traces = {"train": trace}
    else:
        raise ConfigError(f"unknown method {method!r}")

    reported = _final_energy(circuit, angles, h, nm, cfg, seed)
    if reported is None:
        reported = energy
    return MethodRunResult(
        method=method,
        seed=seed,
        circuit=circuit,
        angles=angles,
        energy=float(reported),
        n_1q=circuit.count_1q(),
        n_2q=circuit.count_2q(),
        orig_1q=orig_1q,
        orig_2q=orig_2q,
        traces=traces,
    )


# ---------------------------------------------------------------------------
# summaries


@dataclass
class SummaryRow:
    """One line of the comparison table (per-method medians over seeds)."""

    name: str
    qubits: int
    depth: int
    method: str
    n_1q: int
    n_2q: int
    ref_energy: float
    energy: float
    gap: float
    improvement_pct: float | None  # None marks the baseline row

    def as_csv_row(self) -> list:
        imp = "baseline" if self.improvement_pct is None else repr(self.improvement_pct)
        return [
            self.name, self.qubits, self.depth, self.method, self.n_1q, self.n_2q,
            repr(self.ref_energy), repr(self.energy), repr(self.gap), imp,
        ]

    def pretty(self) -> str:
        imp = "baseline" if self.improvement_pct is None else f"{self.improvement_pct:.2f}%"
        return (
            f"{self.name:>10} {self.qubits:>3} {self.depth:>5} {self.method:>11} "
            f"{self.n_1q:>6} {self.n_2q:>6} {self.ref_energy:>12.4f} "
            f"{self.energy:>12.4f} {self.gap:>10.4f} {imp:>10}"
        )


SUMMARY_COLUMNS = [
    "name", "qubits", "depth", "method", "n_1q", "n_2q",
    "ref_energy", "energy", "gap", "improvement_pct",
]

SUMMARY_HEADER = (
    f"{'name':>10} {'qb':>3} {'depth':>5} {'method':>11} {'n_1q':>6} {'n_2q':>6} "
    f"{'ref_energy':>12} {'energy':>12} {'gap':>10} {'improv':>10}"
)


def improvement_percent(gap_baseline: float, gap_method: float) -> float:
    """Relative gap reduction vs the baseline, in percent.

    Negative when the method's gap exceeds the baseline's.
    """
    return 100.0 * (gap_baseline - gap_method) / gap_baseline


def summarize(
    name: str,
    h: Hamiltonian,
    depth: int,
    results: dict[str, list[MethodRunResult]],
    ref: float,
    baseline: str = "vanilla",
) -> list[SummaryRow]:
    """Median-over-seeds summary rows, improvement relative to the baseline."""
    gaps: dict[str, float] = {}
    rows: list[SummaryRow] = []
    for method, runs in results.items():
        energy = float(np.median([r.energy for r in runs]))
        gaps[method] = energy - ref
    for method, runs in results.items():
        energy = float(np.median([r.energy for r in runs]))
        gap = energy - ref
        if method == baseline or baseline not in gaps:
            imp = None
        else:
            imp = improvement_percent(gaps[baseline], gap)
        rows.append(
            SummaryRow(
                name=name,
                qubits=h.n_qubits,
                depth=depth,
                method=method,
                n_1q=int(round(float(np.median([r.n_1q for r in runs])))),
                n_2q=int(round(float(np.median([r.n_2q for r in runs])))),
                ref_energy=ref,
                energy=energy,
                gap=gap,
                improvement_pct=imp,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# file output


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path, columns, rows, metadata: dict) -> None:
    """CSV with a leading ``#`` metadata block; written atomically."""
    buf = io.StringIO()
    for key, value in metadata.items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(row)
    _atomic_write(str(path), buf.getvalue())


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Read a harness CSV back, skipping the metadata block."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def _metadata(cfg: ExperimentConfig, command: str) -> dict:
    return {
        "command": command,
        "seeds": ",".join(str(s) for s in cfg.seeds),
        "config": cfg.config_hash(),
        "version": __version__,
    }


def _write_run_artifacts(out_dir: str, cfg: ExperimentConfig, result: MethodRunResult) -> None:
    meta = _metadata(cfg, "run")
    meta["seed"] = result.seed
    meta["method"] = result.method
    meta["orig_1q"] = result.orig_1q
    meta["orig_2q"] = result.orig_2q
    for stage_name, trace in result.traces.items():
        suffix = "" if stage_name == "train" else f"_{stage_name}"
        path = os.path.join(
            out_dir, f"trace_{result.method}_seed{result.seed}{suffix}.csv"
        )
        buf = io.StringIO()
        for key, value in meta.items():
            buf.write(f"# {key}: {value}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "energy", "grad_norm", "active_1q", "active_2q"])
        for r in trace.rows:
            writer.writerow(
                [r.epoch, repr(r.energy), repr(r.grad_norm), r.active_1q, r.active_2q]
            )
        _atomic_write(path, buf.getvalue())
    _atomic_write(
        os.path.join(out_dir, f"circuit_{result.method}_seed{result.seed}.txt"),
        circuit_to_text(result.circuit),
    )


# ---------------------------------------------------------------------------
# commands


def _per_seed_rows(name, h, depth, results: dict[str, list[MethodRunResult]]):
    rows = []
    for method, runs in results.items():
        for r in runs:
            rows.append(
                [name, h.n_qubits, depth, method, r.seed, r.n_1q, r.n_2q,
                 repr(r.energy)]
            )
    return rows


PER_SEED_COLUMNS = ["name", "qubits", "depth", "method", "seed", "n_1q", "n_2q", "energy"]


def cmd_run(cfg: ExperimentConfig) -> list[SummaryRow]:
    """Run the configured method for every seed; write traces and summary."""
    h = load_problem(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    ref = reference_energy(h)
    results = {cfg.method: []}
    for seed in cfg.seeds:
        result = run_method(h, cfg, cfg.method, seed)
        results[cfg.method].append(result)
        _write_run_artifacts(cfg.out_dir, cfg, result)
    rows = summarize(cfg.name, h, cfg.depth, results, ref)
    write_csv(
        os.path.join(cfg.out_dir, "runs.csv"),
        PER_SEED_COLUMNS,
        _per_seed_rows(cfg.name, h, cfg.depth, results),
        _metadata(cfg, "run"),
    )
    write_csv(
        os.path.join(cfg.out_dir, "summary.csv"),
        SUMMARY_COLUMNS,
        [r.as_csv_row() for r in rows],
        _metadata(cfg, "run"),
    )
    return rows


def cmd_compare(cfg: ExperimentConfig) -> list[SummaryRow]:
    """Run every configured method under a shared noise setting."""
    h = load_problem(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    ref = reference_energy(h)
    methods = list(cfg.methods)
    if "randomprune" in methods and "antibp" not in methods:
        raise ConfigError("randomprune in compare requires antibp for matched counts")
    results: dict[str, list[MethodRunResult]] = {m: [] for m in methods}
    for seed in cfg.seeds:
        antibp_counts = None
        for method in methods:
            if method == "randomprune":
                result = run_method(h, cfg, method, seed, keep_counts=antibp_counts)
            else:
                result = run_method(h, cfg, method, seed)
            if method == "antibp":
                antibp_counts = (result.n_1q, result.n_2q)
            results[method].append(result)
            _write_run_artifacts(cfg.out_dir, cfg, result)
    rows = summarize(cfg.name, h, cfg.depth, results, ref)
    write_csv(
        os.path.join(cfg.out_dir, "compare_runs.csv"),
        PER_SEED_COLUMNS,
        _per_seed_rows(cfg.name, h, cfg.depth, results),
        _metadata(cfg, "compare"),
    )
    write_csv(
        os.path.join(cfg.out_dir, "compare_summary.csv"),
        SUMMARY_COLUMNS,
        [r.as_csv_row() for r in rows],
        _metadata(cfg, "compare"),
    )
    return rows


def cmd_sweep_depth(cfg: ExperimentConfig) -> list[list]:
    """One run per (depth, method, seed); emits per-depth medians."""
    if len(cfg.depths) < 2:
        raise ConfigError("sweep-depth needs at least two depths")
    h = load_problem(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    run_rows = []
    median_rows = []
    for depth in cfg.depths:
        depth_cfg = replace(cfg, depth=depth)
        for method in cfg.methods:
            energies = []
            for seed in cfg.seeds:
                result = run_method(h, depth_cfg, method, seed)
                energies.append(result.energy)
                run_rows.append([depth, method, seed, repr(result.energy)])
            median_rows.append([depth, method, repr(float(np.median(energies)))])
    write_csv(
        os.path.join(cfg.out_dir, "sweep_runs.csv"),
        ["depth", "method", "seed", "energy"],
        run_rows,
        _metadata(cfg, "sweep-depth"),
    )
    write_csv(
        os.path.join(cfg.out_dir, "sweep_summary.csv"),
        ["depth", "method", "median_energy"],
        median_rows,
        _metadata(cfg, "sweep-depth"),
    )
    return median_rows


def gradient_variance(
    h: Hamiltonian,
    depth: int,
    n_samples: int,
    master_seed: int,
    component: int = 0,
    circuit_factory=None,
) -> float:
    """Sample variance of one gradient component over random initializations.

    Each sample draws a fresh circuit from the layered family (or the
    supplied factory) plus fresh uniform angles, then reads the adjoint
    gradient at ``component``.
    """
    if n_samples < 2:
        raise ValueError("variance needs at least two samples")
    values = np.empty(n_samples)
    for s in range(n_samples):
        if circuit_factory is None:
            circuit = random_layered(h.n_qubits, depth, seed=[master_seed, depth, s, 0])
        else:
            circuit = circuit_factory(depth, [master_seed, depth, s, 0])
        angles = random_angles(circuit.n_param_slots, seed=[master_seed, depth, s, 1])
        values[s] = adjoint_gradient(circuit, h, angles)[component]
    return float(np.var(values, ddof=1))


def cmd_gradvar(cfg: ExperimentConfig) -> list[list]:
    """Gradient-component variance per depth (vanishing-gradient diagnostic)."""
    if len(cfg.depths) < 1:
        raise ConfigError("gradvar needs at least one depth")
    if cfg.gradvar_samples < 2:
        raise ConfigError("gradvar needs at least two samples")
    h = load_problem(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    rows = []
    for depth in cfg.depths:
        var = gradient_variance(
            h, depth, cfg.gradvar_samples, cfg.seeds[0], cfg.gradvar_component
        )
        rows.append([depth, repr(var), cfg.gradvar_samples, cfg.gradvar_component])
    write_csv(
        os.path.join(cfg.out_dir, "gradvar.csv"),
        ["depth", "variance", "n_samples", "component"],
        rows,
        _metadata(cfg, "gradvar"),
    )
    return rows


def cmd_ablation(cfg: ExperimentConfig) -> dict[str, float]:
    """Architecture search vs count-matched random pruning, per seed."""
    h = load_problem(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    ref = reference_energy(h)
    rows = []
    searched: list[float] = []
    matched: list[float] = []
    for seed in cfg.seeds:
        a = run_method(h, cfg, "antibp", seed)
        r = run_method(h, cfg, "randomprune", seed, keep_counts=(a.n_1q, a.n_2q))
        if (r.n_1q, r.n_2q) != (a.n_1q, a.n_2q):
            raise RuntimeError("count matching failed between ablation arms")
        searched.append(a.energy)
        matched.append(r.energy)
        rows.append(
            [seed, a.n_1q, a.n_2q, repr(a.energy), repr(r.energy)]
        )
        _write_run_artifacts(cfg.out_dir, cfg, a)
        _write_run_artifacts(cfg.out_dir, cfg, r)
    medians = {
        "antibp": float(np.median(searched)),
        "randomprune": float(np.median(matched)),
        "ref_energy": ref,
    }
    rows.append(["median", "", "", repr(medians["antibp"]), repr(medians["randomprune"])])
    write_csv(
        os.path.join(cfg.out_dir, "ablation.csv"),
        ["seed", "n_1q", "n_2q", "energy_antibp", "energy_randomprune"],
        rows,
        _metadata(cfg, "ablation"),
    )
    return medians


def zero_state_energy(h: Hamiltonian) -> float:
    """Energy of the untouched register, ``<0...0|H|0...0>``."""
    return float(expectation(init_zero_state(h.n_qubits), h))
