"""Experiment drivers: schedule independent cells, aggregate, write CSV tables.

Every output file starts with a metadata line carrying the package version,
the configuration hash and the master seed; reruns of an archived
configuration reproduce the files byte for byte.  A failed cell becomes a row
in errors.csv and the sweep continues.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .chain import proposal_statistics, run_chain, summarize, write_trace_csv
from .config import ExperimentConfig, StrategySpec
from .errors import ConfigError
from .ising import IsingInstance, exact_summary
from .seeds import child_seed
from .spectral import (
    build_P_classical,
    build_Q_quantum_bruteforce,
    build_Q_quantum_rowwise,
    ensemble_gap_stats,
    fit_scaling,
    interpolate_sqrt_n_gap,
    quantum_enhancement_factor,
    transition_from_proposal,
)

_CLASSICAL_KINDS = ("uniform", "local_flip")


@dataclass
class ExperimentOutcome:
    """Completed-cell count plus (context, message) rows for failed cells."""

    completed: int
    errors: list

GAPS_HEADER = ("instance_id", "strategy", "q", "n_g", "T", "delta", "delta_err",
               "asymmetry", "n_samples", "n")
SUMMARY_HEADER = ("strategy", "q", "n_g", "T", "n", "n_instances",
                  "delta_mean", "delta_err", "delta_log2_mean")
FITS_HEADER = ("strategy", "T", "a", "k", "k_err", "k_qef")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _meta_line(config: ExperimentConfig) -> str:
    return (
        f"# isinglab={__version__} kind={config.kind} "
        f"config={config.config_hash()} master_seed={config.master_seed}"
    )


def write_csv(path, meta: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(meta + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path) -> tuple[str, list[str], list[list[str]]]:
    """Read one of our CSV files back: (meta line, header, rows of strings)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    meta = lines[0] if lines and lines[0].startswith("#") else ""
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    header = body[0].split(",")
    rows = [ln.split(",") for ln in body[1:]]
    return meta, header, rows


def _group_count(kind: str, n: int, q) -> int | None:
    if kind == "cg_multiple_groups":
        return math.ceil(n / q)
    if kind.startswith("cg_"):
        return 1
    return None


# ---------------------------------------------------------------------------
# Spectral-gap sweeps (spectral-sweep and temperature-sweep)
# ---------------------------------------------------------------------------

def _gap_cell(args):
    """Estimate Q once for one (instance, strategy, q) and assemble P per temperature."""
    instance, spec_dict, q, temperatures, master_seed, spectral_cap = args
    spec = StrategySpec.from_dict(spec_dict)
    label = spec.label(q)
    if spec.kind in _CLASSICAL_KINDS:
        base = build_P_classical(instance, spec.kind, temperatures[0], cap=spectral_cap)
    else:
        strategy = spec.build(q)
        seed = child_seed(master_seed, "Q", instance.instance_id, label)
        if spec.kind == "cg_multiple_groups":
            base = build_Q_quantum_bruteforce(
                instance, strategy, temperatures[0],
                n_samples=spec.n_samples, seed=seed, cap=spectral_cap,
            )
        else:
            base = build_Q_quantum_rowwise(
                instance, strategy, temperatures[0],
                samples_per_row=spec.samples_per_row, seed=seed,
                paired=spec.paired, cap=spectral_cap,
            )
    rows = []
    for i, temperature in enumerate(temperatures):
        tm = base if i == 0 else transition_from_proposal(
            instance, base.proposal, temperature, label,
            n_samples=base.n_samples, asymmetry=base.asymmetry,
        )
        rows.append({
            "instance_id": instance.instance_id,
            "strategy": label,
            "kind": spec.kind,
            "interpolates": spec.interpolates(),
            "q": q,
            "n_g": _group_count(spec.kind, instance.n, q),
            "T": float(temperature),
            "n": instance.n,
            "delta": tm.gap,
            "asymmetry": tm.asymmetry,
            "n_samples": tm.n_samples,
        })
    return rows


def _gap_cell_safe(args):
    try:
        return ("ok", _gap_cell(args))
    except Exception as exc:  # partial-failure policy: record and continue
        instance, spec_dict, q, *_ = args
        context = f"{instance.instance_id}/{StrategySpec.from_dict(spec_dict).label(q)}"
        return ("error", context, f"{type(exc).__name__}: {exc}")


def _map_cells(fn, cells, workers: int):
    if workers <= 1 or len(cells) <= 1:
        return [fn(cell) for cell in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))


def _aggregate_gaps(records) -> list[dict]:
    """Mean, standard error and log2 mean of delta per (strategy, q, T, n)."""
    groups: dict[tuple, list] = {}
    info: dict[tuple, dict] = {}
    for rec in records:
        key = (rec["strategy"], rec["T"], rec["n"])
        groups.setdefault(key, []).append(rec["delta"])
        info[key] = rec
    out = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2])):
        deltas = groups[key]
        mean, sem, log_mean = ensemble_gap_stats(deltas)
        rec = info[key]
        out.append({
            "strategy": key[0],
            "kind": rec["kind"],
            "interpolates": rec["interpolates"],
            "q": rec["q"],
            "n_g": rec["n_g"],
            "T": key[1],
            "n": key[2],
            "n_instances": len(deltas),
            "delta_mean": mean,
            "delta_err": sem,
            "delta_log2_mean": log_mean,
        })
    return out


def _interpolated_rows(summary_rows) -> list[dict]:
    """Synthetic q = sqrt(n) rows for strategies swept over bracketing group sizes."""
    by_spec: dict[tuple, dict[int, tuple]] = {}
    meta: dict[tuple, dict] = {}
    for row in summary_rows:
        if not row["interpolates"]:
            continue
        key = (row["kind"], row["T"], row["n"])
        by_spec.setdefault(key, {})[int(row["q"])] = (row["delta_mean"], row["delta_err"])
        meta[key] = row
    out = []
    for key in sorted(by_spec, key=lambda k: (k[0], k[1], k[2])):
        kind, temperature, n = key
        mean, err = interpolate_sqrt_n_gap(by_spec[key], n)
        row = meta[key]
        out.append({
            "strategy": f"{kind}@sqrt_n",
            "kind": kind,
            "interpolates": False,
            "q": math.sqrt(n),
            "n_g": None,
            "T": temperature,
            "n": n,
            "n_instances": row["n_instances"],
            "delta_mean": mean,
            "delta_err": err,
            "delta_log2_mean": math.nan,
        })
    return out


def _fit_rows(summary_rows) -> list[dict]:
    """Scaling fits per (strategy, T) with enhancement factors against the best classical."""
    points: dict[tuple, list] = {}
    for row in summary_rows:
        key = (row["strategy"], row["T"])
        points.setdefault(key, []).append((row["n"], row["delta_mean"], row["delta_err"]))
    fits = {}
    for key, pts in points.items():
        if len({p[0] for p in pts}) < 3:
            continue
        if any(p[1] <= 0 for p in pts):
            continue
        fits[key] = fit_scaling(pts)
    out = []
    for key in sorted(fits):
        strategy, temperature = key
        fit = fits[key]
        classical = [
            fits[(s, t)].exponent for (s, t) in fits
            if t == temperature and s in _CLASSICAL_KINDS
        ]
        k_qef = None
        if classical and strategy not in _CLASSICAL_KINDS and fit.exponent > 0:
            k_qef = quantum_enhancement_factor(fit.exponent, min(classical))
        out.append({
            "strategy": strategy,
            "T": temperature,
            "a": fit.prefactor,
            "k": fit.exponent,
            "k_err": fit.exponent_err,
            "k_qef": k_qef,
        })
    return out


def run_gap_sweep(config: ExperimentConfig, out_dir) -> ExperimentOutcome:
    """Shared driver for spectral-sweep and temperature-sweep experiments."""
    os.makedirs(out_dir, exist_ok=True)
    instances = config.resolve_instances()
    cells = []
    for inst in instances:
        for spec in config.strategies:
            for q in spec.q_values(inst.n):
                cells.append((
                    inst, spec.to_dict(), q,
                    tuple(config.temperatures), config.master_seed, config.spectral_cap,
                ))
    results = _map_cells(_gap_cell_safe, cells, config.workers)
    records, errors = [], []
    completed = 0
    for res in results:
        if res[0] == "ok":
            records.extend(res[1])
            completed += 1
        else:
            errors.append((res[1], res[2]))

    meta = _meta_line(config)
    records.sort(key=lambda r: (r["strategy"], r["T"], r["n"], r["instance_id"]))
    write_csv(
        os.path.join(out_dir, "gaps.csv"), meta, GAPS_HEADER,
        [
            (r["instance_id"], r["strategy"], r["q"], r["n_g"], r["T"], r["delta"],
             0.0, r["asymmetry"], r["n_samples"], r["n"])
            for r in records
        ],
    )

    summary = _aggregate_gaps(records)
    summary.extend(_interpolated_rows(summary))
    summary.sort(key=lambda r: (r["strategy"], r["T"], r["n"]))
    write_csv(
        os.path.join(out_dir, "gap_summary.csv"), meta, SUMMARY_HEADER,
        [
            (r["strategy"], r["q"], r["n_g"], r["T"], r["n"], r["n_instances"],
             r["delta_mean"], r["delta_err"], r["delta_log2_mean"])
            for r in summary
        ],
    )

    if config.kind == "spectral-sweep":
        fit_rows = _fit_rows(summary)
        if fit_rows:
            write_csv(
                os.path.join(out_dir, "fits.csv"), meta, FITS_HEADER,
                [(r["strategy"], r["T"], r["a"], r["k"], r["k_err"], r["k_qef"]) for r in fit_rows],
            )

    if errors:
        write_csv(os.path.join(out_dir, "errors.csv"), meta, ("context", "error"), errors)
    return ExperimentOutcome(completed=completed, errors=errors)


def run_fit_from_summary(summary_path, out_path) -> int:
    """Refit scaling exponents from an existing gap_summary.csv."""
    meta, header, rows = read_csv(summary_path)
    idx = {name: i for i, name in enumerate(header)}
    summary = []
    for row in rows:
        summary.append({
            "strategy": row[idx["strategy"]],
            "T": float(row[idx["T"]]),
            "n": int(row[idx["n"]]),
            "delta_mean": float(row[idx["delta_mean"]]),
            "delta_err": float(row[idx["delta_err"]]),
        })
    fit_rows = _fit_rows(summary)
    write_csv(
        out_path, meta or "# isinglab fit", FITS_HEADER,
        [(r["strategy"], r["T"], r["a"], r["k"], r["k_err"], r["k_qef"]) for r in fit_rows],
    )
    return len(fit_rows)


# ---------------------------------------------------------------------------
# Chain ensembles
# ---------------------------------------------------------------------------

def _resolve_chain_q(spec: StrategySpec, n: int) -> int | None:
    qs = spec.q_values(n)
    if len(qs) != 1:
        raise ConfigError(
            f"strategy {spec.kind} with q = 'sqrt_n' needs integer sqrt(n); n = {n}"
        )
    return qs[0]


def _single_instance(config: ExperimentConfig) -> IsingInstance:
    instances = config.resolve_instances()
    if len(instances) != 1:
        raise ConfigError(f"{config.kind} runs on exactly one instance, got {len(instances)}")
    return instances[0]


def run_chain_ensemble(config: ExperimentConfig, out_dir) -> ExperimentOutcome:
    """Chain matrix (strategies x chains) with per-chain and ensemble summaries."""
    os.makedirs(out_dir, exist_ok=True)
    if len(config.temperatures) != 1:
        raise ConfigError("chain-ensemble uses exactly one temperature")
    instance = _single_instance(config)
    temperature = config.temperatures[0]

    oracle = None
    if instance.n <= config.enumeration_cap:
        oracle = exact_summary(instance, temperature, levels=16, cap=config.enumeration_cap)

    meta = _meta_line(config)
    chain_rows, ensemble_rows, discovery_rows, errors = [], [], [], []
    completed = 0
    traces_dir = os.path.join(out_dir, "traces")
    if config.write_traces:
        os.makedirs(traces_dir, exist_ok=True)

    for spec in config.strategies:
        try:
            q = _resolve_chain_q(spec, instance.n)
            strategy = spec.build(q)
        except Exception as exc:
            errors.append((spec.label(), f"{type(exc).__name__}: {exc}"))
            continue
        label = spec.label(q)
        steps = spec.steps or config.steps
        sum_e = None
        sum_m = None
        step_index = None
        for chain in range(config.chains):
            seed = child_seed(config.master_seed, "chain", label, chain)
            try:
                trace = run_chain(
                    instance, strategy, temperature, steps,
                    seed=seed, record_cap=config.record_cap,
                    ground_energy=None if oracle is None else oracle.ground_energy,
                )
            except Exception as exc:
                errors.append((f"{label}/chain{chain}", f"{type(exc).__name__}: {exc}"))
                continue
            summary = summarize(trace)
            if sum_e is None:
                step_index = summary.step_index
                sum_e = np.zeros_like(summary.cumulative_energy)
                sum_m = np.zeros_like(summary.cumulative_magnetisation)
            sum_e += summary.cumulative_energy
            sum_m += summary.cumulative_magnetisation
            keep = np.arange(config.output_stride - 1, step_index.size, config.output_stride)
            if keep.size == 0 or keep[-1] != step_index.size - 1:
                keep = np.append(keep, step_index.size - 1)
            for i in keep:
                chain_rows.append((
                    label, chain, int(step_index[i]),
                    summary.cumulative_magnetisation[i], summary.cumulative_energy[i],
                ))
            found = summary.found_ground_state_at
            discovery_rows.append((
                label, chain, -1 if found is None else found, steps, summary.acceptance_rate,
            ))
            completed += 1
            if config.write_traces:
                with open(
                    os.path.join(traces_dir, f"{label}-chain{chain:02d}.csv"),
                    "w", encoding="utf-8", newline="\n",
                ) as fh:
                    fh.write(meta + "\n")
                    write_trace_csv(trace, fh)
        if sum_e is not None:
            count = sum(1 for row in discovery_rows if row[0] == label)
            keep = np.arange(config.output_stride - 1, step_index.size, config.output_stride)
            if keep.size == 0 or keep[-1] != step_index.size - 1:
                keep = np.append(keep, step_index.size - 1)
            for i in keep:
                ensemble_rows.append((
                    label, int(step_index[i]), sum_e[i] / count, sum_m[i] / count,
                ))

    write_csv(os.path.join(out_dir, "chains.csv"), meta,
              ("strategy", "chain", "step", "cumulative_m", "cumulative_E"), chain_rows)
    write_csv(os.path.join(out_dir, "ensemble.csv"), meta,
              ("strategy", "step", "mean_cumulative_E", "mean_cumulative_m"), ensemble_rows)
    write_csv(os.path.join(out_dir, "discovery.csv"), meta,
              ("strategy", "chain", "found_at", "steps", "acceptance_rate"), discovery_rows)

    if oracle is not None:
        write_csv(
            os.path.join(out_dir, "levels.csv"), meta, ("rank", "state", "energy"),
            [
                (rank, format(state, f"0{instance.n}b"), float(e))
                for rank, (state, e) in enumerate(oracle.sorted_levels[:10])
            ],
        )
        write_csv(
            os.path.join(out_dir, "oracle.csv"), meta,
            ("instance_id", "T", "boltzmann_energy", "boltzmann_magnetisation",
             "min_energy", "min_probability", "log_partition_function"),
            [(
                instance.instance_id, temperature, oracle.boltzmann_energy,
                oracle.boltzmann_magnetisation, oracle.ground_energy,
                oracle.min_probability, oracle.log_partition_function,
            )],
        )

    if errors:
        write_csv(os.path.join(out_dir, "errors.csv"), meta, ("context", "error"), errors)
    return ExperimentOutcome(completed=completed, errors=errors)


# ---------------------------------------------------------------------------
# Proposal statistics
# ---------------------------------------------------------------------------

def _downsample(values: np.ndarray, cdf: np.ndarray, limit: int = 512):
    if values.size <= limit:
        return values, cdf
    keep = np.unique(np.round(np.linspace(0, values.size - 1, limit)).astype(int))
    return values[keep], cdf[keep]


def run_proposal_stats(config: ExperimentConfig, out_dir) -> ExperimentOutcome:
    """Cumulative Hamming / |dE| distributions of proposed moves per strategy."""
    os.makedirs(out_dir, exist_ok=True)
    if len(config.temperatures) != 1:
        raise ConfigError("proposal-stats uses exactly one temperature")
    instance = _single_instance(config)
    temperature = config.temperatures[0]
    meta = _meta_line(config)
    rows, errors = [], []
    completed = 0
    for spec in config.strategies:
        try:
            q = _resolve_chain_q(spec, instance.n)
            strategy = spec.build(q)
            label = spec.label(q)
            steps = spec.steps or config.steps
            seed = child_seed(config.master_seed, "proposal", label)
            trace = run_chain(
                instance, strategy, temperature, steps,
                seed=seed, record_cap=config.record_cap,
            )
            stats = proposal_statistics(trace)
        except Exception as exc:
            errors.append((spec.label(), f"{type(exc).__name__}: {exc}"))
            continue
        for v, c in zip(stats.hamming_values, stats.hamming_cdf):
            rows.append((label, "hamming", float(v), float(c)))
        de_vals, de_cdf = _downsample(stats.abs_energy_values, stats.abs_energy_cdf)
        for v, c in zip(de_vals, de_cdf):
            rows.append((label, "abs_dE", float(v), float(c)))
        completed += 1
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    write_csv(os.path.join(out_dir, "proposal_stats.csv"), meta,
              ("strategy", "metric", "value", "cumulative_probability"), rows)
    if errors:
        write_csv(os.path.join(out_dir, "errors.csv"), meta, ("context", "error"), errors)
    return ExperimentOutcome(completed=completed, errors=errors)


RUNNERS = {
    "spectral-sweep": run_gap_sweep,
    "temperature-sweep": run_gap_sweep,
    "chain-ensemble": run_chain_ensemble,
    "proposal-stats": run_proposal_stats,
}


def run_experiment(config: ExperimentConfig, out_dir) -> ExperimentOutcome:
    """Dispatch a validated configuration to its driver."""
    config.validate()
    return RUNNERS[config.kind](config, out_dir)
