"""Experiment configurations: validated, fully serializable, content-hashed.

A configuration (plus the package version) pins every input of an experiment,
so archiving the JSON file is enough to reproduce outputs bit for bit.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

from .chain import DEFAULT_RECORD_CAP
from .emulator import GAMMA_RANGE, TIME_RANGE
from .errors import ConfigError
from .ising import ENUMERATION_CAP, MODEL_CLASSES, IsingInstance, generate_instance, load_instance
from .proposals import STRATEGY_KINDS, ProposalStrategy, make_strategy
from .seeds import child_seed
from .spectral import SPECTRAL_CAP

EXPERIMENT_KINDS = ("spectral-sweep", "temperature-sweep", "chain-ensemble", "proposal-stats")

_CG_KINDS = ("cg_naive_local_group", "cg_improved_local_group", "cg_multiple_groups")


@dataclass
class StrategySpec:
    """Configuration-file form of one proposal strategy."""

    kind: str
    q: int | str | None = None  # integer group size, or "sqrt_n"
    n_g: int | None = None
    gamma_range: tuple = GAMMA_RANGE
    t_range: tuple = TIME_RANGE
    evolution: str = "exact"
    slices: int | None = None
    samples_per_row: int = 30
    paired: bool = True
    n_samples: int | None = None
    steps: int | None = None

    def validate(self):
        if self.kind not in STRATEGY_KINDS:
            raise ConfigError(f"unknown strategy kind {self.kind!r}")
        if self.kind in _CG_KINDS:
            if self.q is None:
                raise ConfigError(f"strategy {self.kind} needs a group size q")
            if isinstance(self.q, str) and self.q != "sqrt_n":
                raise ConfigError(f"q must be an integer or 'sqrt_n', got {self.q!r}")
        if self.evolution not in ("exact", "trotter"):
            raise ConfigError(f"evolution must be 'exact' or 'trotter', got {self.evolution!r}")
        if self.samples_per_row < 1:
            raise ConfigError("samples_per_row must be >= 1")

    def q_values(self, n: int) -> list[int | None]:
        """Concrete group sizes for an n-spin instance ('sqrt_n' brackets root n)."""
        if self.kind not in _CG_KINDS:
            return [None]
        if self.q == "sqrt_n":
            root = math.sqrt(n)
            nearest = round(root)
            if abs(root - nearest) < 1e-12:
                return [nearest]
            return [math.floor(root), math.ceil(root)]
        return [int(self.q)]

    def interpolates(self) -> bool:
        return self.kind in _CG_KINDS and self.q == "sqrt_n"

    def label(self, q: int | None = None) -> str:
        if self.kind not in _CG_KINDS:
            return self.kind
        if q is None:
            return f"{self.kind}@sqrt_n" if self.q == "sqrt_n" else f"{self.kind}_q{self.q}"
        return f"{self.kind}_q{q}"

    def build(self, q: int | None = None) -> ProposalStrategy:
        """Instantiate the strategy, resolving 'sqrt_n' to the given group size."""
        size = q
        if self.kind in _CG_KINDS and size is None:
            if self.q == "sqrt_n":
                raise ConfigError("q = 'sqrt_n' needs a concrete group size at build time")
            size = int(self.q)
        return make_strategy(
            self.kind,
            q=size,
            n_g=self.n_g,
            gamma_range=tuple(self.gamma_range),
            t_range=tuple(self.t_range),
            evolution=self.evolution,
            slices=self.slices,
        )

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.q is not None:
            out["q"] = self.q
        if self.n_g is not None:
            out["n_g"] = self.n_g
        out["gamma_range"] = list(self.gamma_range)
        out["t_range"] = list(self.t_range)
        out["evolution"] = self.evolution
        if self.slices is not None:
            out["slices"] = self.slices
        out["samples_per_row"] = self.samples_per_row
        out["paired"] = self.paired
        if self.n_samples is not None:
            out["n_samples"] = self.n_samples
        if self.steps is not None:
            out["steps"] = self.steps
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "StrategySpec":
        known = {
            "kind", "q", "n_g", "gamma_range", "t_range", "evolution",
            "slices", "samples_per_row", "paired", "n_samples", "steps",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown strategy fields: {sorted(unknown)}")
        spec = cls(**{k: data[k] for k in data})
        spec.gamma_range = tuple(spec.gamma_range)
        spec.t_range = tuple(spec.t_range)
        spec.validate()
        return spec


@dataclass
class GeneratorSpec:
    """Deterministic random-instance source: per-(n, index) child seeds."""

    n_values: list[int]
    model_class: str = "fully_connected"
    count: int = 1
    count_overrides: dict[int, int] = field(default_factory=dict)
    seed: int = 0

    def validate(self):
        if not self.n_values:
            raise ConfigError("generator needs at least one n value")
        if any(n < 2 for n in self.n_values):
            raise ConfigError("generator n values must be >= 2")
        if self.model_class not in MODEL_CLASSES:
            raise ConfigError(f"unknown model class {self.model_class!r}")
        if self.count < 1:
            raise ConfigError("generator count must be >= 1")

    def count_for(self, n: int) -> int:
        return int(self.count_overrides.get(n, self.count))

    def instances(self) -> list[IsingInstance]:
        out = []
        for n in self.n_values:
            for i in range(self.count_for(n)):
                inst_seed = child_seed(self.seed, "instance", n, i)
                inst = generate_instance(n, self.model_class, inst_seed)
                out.append(dataclasses.replace(inst, instance_id=f"{self.model_class}-n{n}-{i:03d}"))
        return out

    def to_dict(self) -> dict:
        out = {
            "n_values": list(self.n_values),
            "model_class": self.model_class,
            "count": self.count,
            "seed": self.seed,
        }
        if self.count_overrides:
            out["count_overrides"] = {str(k): v for k, v in self.count_overrides.items()}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorSpec":
        overrides = {int(k): int(v) for k, v in data.get("count_overrides", {}).items()}
        spec = cls(
            n_values=list(data["n_values"]),
            model_class=data.get("model_class", "fully_connected"),
            count=int(data.get("count", 1)),
            count_overrides=overrides,
            seed=int(data.get("seed", 0)),
        )
        spec.validate()
        return spec


@dataclass
class ExperimentConfig:
    """One experiment: instance source, strategies, temperatures, sizes, seeds."""

    kind: str
    strategies: list[StrategySpec]
    temperatures: list[float]
    instance_files: list[str] = field(default_factory=list)
    generator: GeneratorSpec | None = None
    steps: int = 10_000
    chains: int = 10
    master_seed: int = 0
    spectral_cap: int = SPECTRAL_CAP
    enumeration_cap: int = ENUMERATION_CAP
    record_cap: int = DEFAULT_RECORD_CAP
    output_stride: int = 1
    write_traces: bool = False
    workers: int = 1

    def validate(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if not self.strategies:
            raise ConfigError("need at least one strategy")
        for spec in self.strategies:
            spec.validate()
        if not self.temperatures or any(t <= 0 for t in self.temperatures):
            raise ConfigError("temperatures must be a non-empty list of positive values")
        if bool(self.instance_files) == (self.generator is not None):
            raise ConfigError("give exactly one instance source: files or generator")
        if self.generator is not None:
            self.generator.validate()
        if self.kind in ("chain-ensemble", "proposal-stats"):
            if self.steps < 1 or any((s.steps or self.steps) < 1 for s in self.strategies):
                raise ConfigError("chain experiments need steps >= 1")
            if self.chains < 1:
                raise ConfigError("need at least one chain")
        if self.output_stride < 1:
            raise ConfigError("output_stride must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def resolve_instances(self) -> list[IsingInstance]:
        if self.generator is not None:
            return self.generator.instances()
        return [load_instance(path) for path in self.instance_files]

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "strategies": [s.to_dict() for s in self.strategies],
            "temperatures": [float(t) for t in self.temperatures],
            "steps": self.steps,
            "chains": self.chains,
            "master_seed": self.master_seed,
            "spectral_cap": self.spectral_cap,
            "enumeration_cap": self.enumeration_cap,
            "record_cap": self.record_cap,
            "output_stride": self.output_stride,
            "write_traces": self.write_traces,
            "workers": self.workers,
        }
        if self.instance_files:
            out["instance_files"] = list(self.instance_files)
        if self.generator is not None:
            out["generator"] = self.generator.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            config = cls(
                kind=data["kind"],
                strategies=[StrategySpec.from_dict(s) for s in data["strategies"]],
                temperatures=[float(t) for t in data["temperatures"]],
                instance_files=list(data.get("instance_files", [])),
                generator=(
                    GeneratorSpec.from_dict(data["generator"]) if "generator" in data else None
                ),
                steps=int(data.get("steps", 10_000)),
                chains=int(data.get("chains", 10)),
                master_seed=int(data.get("master_seed", 0)),
                spectral_cap=int(data.get("spectral_cap", SPECTRAL_CAP)),
                enumeration_cap=int(data.get("enumeration_cap", ENUMERATION_CAP)),
                record_cap=int(data.get("record_cap", DEFAULT_RECORD_CAP)),
                output_stride=int(data.get("output_stride", 1)),
                write_traces=bool(data.get("write_traces", False)),
                workers=int(data.get("workers", 1)),
            )
        except KeyError as exc:
            raise ConfigError(f"missing configuration field: {exc}") from exc
        config.validate()
        return config

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        return cls.from_dict(data)

    def config_hash(self) -> str:
        # workers only schedules the same cells differently; outputs must be
        # identical for any worker count, so it stays out of the content hash
        content = self.to_dict()
        content.pop("workers", None)
        canonical = json.dumps(content, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
