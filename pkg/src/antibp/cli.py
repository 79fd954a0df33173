"""Command-line experiment harness.

Exit codes: 0 success, 2 configuration problems, 3 numerical failure
(diverged optimization). All file outputs are reproducible for a fixed
config and seed, noisy runs included.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    ConfigError,
    SUMMARY_HEADER,
    build_config,
    cmd_ablation,
    cmd_compare,
    cmd_gradvar,
    cmd_run,
    cmd_sweep_depth,
    read_csv,
)
from .optimize import DivergenceError


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--hamiltonian", help="Pauli-sum observable file")
    parser.add_argument("--depth", type=int, help="circuit depth (layer blocks)")
    parser.add_argument("--method", help="vanilla | idblock | antibp | randomprune")
    parser.add_argument("--seed", type=int, help="single seed (shorthand for seeds=<s>)")
    parser.add_argument("--seeds", help="comma-separated seed list")
    parser.add_argument("--methods", help="comma-separated method list")
    parser.add_argument(
        "--noise-p", type=float, dest="noise_p",
        help="depolarizing probability for both 1q and 2q gates",
    )
    parser.add_argument("--trajectories", type=int, help="trajectories per training step")
    parser.add_argument("--out-dir", dest="out_dir", help="output directory")


def _overrides(args: argparse.Namespace) -> dict[str, str]:
    mapping = {
        "hamiltonian": "hamiltonian",
        "depth": "depth",
        "method": "method",
        "seeds": "seeds",
        "methods": "methods",
        "trajectories": "noise.trajectories",
        "out_dir": "out_dir",
    }
    overrides: dict[str, str] = {}
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = str(value)
    if getattr(args, "seed", None) is not None:
        overrides["seeds"] = str(args.seed)
    if getattr(args, "noise_p", None) is not None:
        overrides["noise.p1q"] = str(args.noise_p)
        overrides["noise.p2q"] = str(args.noise_p)
    if getattr(args, "depths", None) is not None:
        overrides["depths"] = args.depths
    if getattr(args, "samples", None) is not None:
        overrides["gradvar.samples"] = str(args.samples)
    if getattr(args, "component", None) is not None:
        overrides["gradvar.component"] = str(args.component)
    return overrides


def _print_summary(rows) -> None:
    print(SUMMARY_HEADER)
    for row in rows:
        print(row.pretty())


def _cmd_export(args: argparse.Namespace) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    header, rows = read_csv(args.input)
    for col in (args.x, args.y):
        if col not in header:
            raise ConfigError(f"column {col!r} not in {args.input}: {header}")
    xi, yi = header.index(args.x), header.index(args.y)
    gi = header.index(args.group) if args.group in header else None
    groups: dict[str, list[tuple[float, float]]] = {}
    for row in rows:
        key = row[gi] if gi is not None else "series"
        groups.setdefault(key, []).append((float(row[xi]), float(row[yi])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, points in groups.items():
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=key)
    ax.set_xlabel(args.x)
    ax.set_ylabel(args.y)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.output)
    print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="antibp",
        description="Gated architecture search and baselines for statevector VQE",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one method across the configured seeds")
    _add_common_flags(p_run)

    p_cmp = sub.add_parser("compare", help="run all methods under a shared setting")
    _add_common_flags(p_cmp)

    p_sweep = sub.add_parser("sweep-depth", help="repeat runs across circuit depths")
    _add_common_flags(p_sweep)
    p_sweep.add_argument("--depths", help="comma-separated depth list (>= 2)")

    p_gv = sub.add_parser("gradvar", help="gradient-component variance per depth")
    _add_common_flags(p_gv)
    p_gv.add_argument("--depths", help="comma-separated depth list")
    p_gv.add_argument("--samples", type=int, help="random initializations per depth")
    p_gv.add_argument("--component", type=int, help="gradient component index")

    p_abl = sub.add_parser("ablation", help="search vs count-matched random pruning")
    _add_common_flags(p_abl)

    p_exp = sub.add_parser("export", help="plot a harness CSV to SVG/PNG")
    p_exp.add_argument("--input", required=True, help="CSV produced by this tool")
    p_exp.add_argument("--output", required=True, help="figure path (.svg or .png)")
    p_exp.add_argument("--x", default="depth")
    p_exp.add_argument("--y", default="median_energy")
    p_exp.add_argument("--group", default="method")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "export":
            return _cmd_export(args)
        cfg = build_config(args.config, _overrides(args))
        if args.command == "run":
            _print_summary(cmd_run(cfg))
        elif args.command == "compare":
            _print_summary(cmd_compare(cfg))
        elif args.command == "sweep-depth":
            rows = cmd_sweep_depth(cfg)
            for depth, method, energy in rows:
                print(f"depth={depth} method={method} median_energy={energy}")
        elif args.command == "gradvar":
            for depth, var, n_samples, component in cmd_gradvar(cfg):
                print(
                    f"depth={depth} variance={var} "
                    f"(samples={n_samples}, component={component})"
                )
        elif args.command == "ablation":
            medians = cmd_ablation(cfg)
            print(
                f"median energy: antibp={medians['antibp']!r} "
                f"randomprune={medians['randomprune']!r} "
                f"(ref={medians['ref_energy']!r})"
            )
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
