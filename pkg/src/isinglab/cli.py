"""Command-line interface for instance generation, sweeps, ensembles and fits.

Exit codes: 0 success, 2 configuration error, 3 resource-cap error,
4 partial failures (error rows written, remaining cells completed).
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ExperimentConfig
from .errors import ConfigError, ResourceLimitError
from .experiments import run_experiment, run_fit_from_summary
from .ising import MODEL_CLASSES, generate_instance, save_instance
from .presets import PRESET_NAMES, preset_config
from .seeds import child_seed

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_PARTIAL = 4


def _add_run_options(parser):
    parser.add_argument("--config", required=True, help="experiment configuration (JSON)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--workers", type=int, default=None, help="worker processes")
    parser.add_argument(
        "--emulator-mode", choices=("exact", "trotter"), default=None,
        help="override the evolution mode of every strategy",
    )
    parser.add_argument("--trotter-slices", type=int, default=None,
                        help="override the split-step count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isinglab",
        description="Ising spin-glass MCMC laboratory with quantum-emulated proposals",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write random instance files")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--model-class", choices=MODEL_CLASSES, default="fully_connected")
    gen.add_argument("--count", type=int, default=1)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)

    for name in ("spectral-sweep", "temperature-sweep", "chain-ensemble", "proposal-stats"):
        _add_run_options(sub.add_parser(name, help=f"run a {name} experiment"))

    fit = sub.add_parser("fit", help="refit scaling exponents from a gap summary")
    fit.add_argument("--gap-summary", required=True)
    fit.add_argument("--out", required=True, help="output CSV path")

    rep = sub.add_parser("reproduce", help="run a named preset experiment")
    rep.add_argument("--preset", required=True, choices=PRESET_NAMES)
    rep.add_argument("--scale", choices=("desk", "paper"), default="desk")
    rep.add_argument("--out", required=True)
    rep.add_argument("--seed", type=int, default=None)
    rep.add_argument("--workers", type=int, default=None)
    return parser


def _cmd_generate(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.count):
        seed = child_seed(args.seed, "instance", args.n, i)
        instance = generate_instance(args.n, args.model_class, seed)
        path = os.path.join(args.out, f"{args.model_class}-n{args.n}-{i:03d}.ising")
        save_instance(instance, path)
        print(path)
    return EXIT_OK


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        config.master_seed = args.seed
    if args.workers is not None:
        config.workers = args.workers
    if getattr(args, "emulator_mode", None):
        for spec in config.strategies:
            spec.evolution = args.emulator_mode
    if getattr(args, "trotter_slices", None):
        for spec in config.strategies:
            spec.slices = args.trotter_slices
    config.validate()
    return config


def _exit_code(outcome) -> int:
    for context, message in outcome.errors:
        print(f"error: {context}: {message}", file=sys.stderr)
    if not outcome.errors:
        return EXIT_OK
    if outcome.completed == 0 and all(
        message.startswith("ResourceLimitError") for _, message in outcome.errors
    ):
        return EXIT_RESOURCE
    return EXIT_PARTIAL


def _cmd_run(args, kind: str) -> int:
    config = ExperimentConfig.from_json_file(args.config)
    if config.kind != kind:
        raise ConfigError(f"configuration kind {config.kind!r} does not match command {kind!r}")
    config = _apply_overrides(config, args)
    return _exit_code(run_experiment(config, args.out))


def _cmd_fit(args) -> int:
    count = run_fit_from_summary(args.gap_summary, args.out)
    print(f"wrote {count} fits to {args.out}")
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    config = preset_config(args.preset, scale=args.scale, seed=args.seed)
    if args.workers is not None:
        config.workers = args.workers
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "config.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config.to_json())
    return _exit_code(run_experiment(config, args.out))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "reproduce":
            return _cmd_reproduce(args)
        return _cmd_run(args, args.command)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
