"""Ising spin-glass instances, observables, and exact brute-force oracles.

Conventions used throughout the package:

* a spin configuration is a 1-d array of ``+1``/``-1`` entries,
* the bit encoding is ``b_i = (1 - s_i) / 2`` (spin up maps to bit 0),
* the integer index of a configuration packs bit 0 as the most significant
  bit, so ``format(index, f"0{n}b")`` reads spins left to right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError

#: Largest spin count for full 2^n enumeration (2^25 ~ 3.4e7 states).
ENUMERATION_CAP = 25

MODEL_CLASSES = ("fully_connected", "one_d_ring")

_CHUNK = 1 << 16


@dataclass(frozen=True)
class IsingInstance:
    """An Ising problem: symmetric zero-diagonal couplings and local fields."""

    n: int
    couplings: np.ndarray
    fields: np.ndarray
    instance_id: str = ""
    model_class: str = "custom"
    seed: int | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 spins, got n = {self.n}")
        J = np.asarray(self.couplings, dtype=np.float64)
        h = np.asarray(self.fields, dtype=np.float64)
        if J.shape != (self.n, self.n):
            raise ValueError(f"couplings must be {self.n}x{self.n}, got {J.shape}")
        if h.shape != (self.n,):
            raise ValueError(f"fields must have length {self.n}, got {h.shape}")
        if not np.array_equal(J, J.T):
            raise ValueError("couplings must be symmetric")
        if np.any(np.diag(J) != 0.0):
            raise ValueError("couplings must have zero diagonal")
        J = J.copy()
        h = h.copy()
        J.flags.writeable = False
        h.flags.writeable = False
        object.__setattr__(self, "couplings", J)
        object.__setattr__(self, "fields", h)
        if not self.instance_id:
            object.__setattr__(self, "instance_id", f"{self.model_class}-n{self.n}")


# ---------------------------------------------------------------------------
# Spin-state encoding helpers
# ---------------------------------------------------------------------------

def as_spin_state(spins, n: int | None = None) -> np.ndarray:
    """Validate a configuration and return it as an int8 array of +-1."""
    s = np.asarray(spins)
    if s.ndim != 1:
        raise ValueError(f"spin state must be 1-d, got shape {s.shape}")
    if n is not None and s.shape[0] != n:
        raise ValueError(f"expected {n} spins, got {s.shape[0]}")
    out = s.astype(np.int8, copy=True)
    if not np.all(np.abs(out) == 1) or not np.array_equal(out, s):
        raise ValueError("spin entries must be exactly -1 or +1")
    return out


def spins_to_bits(spins) -> np.ndarray:
    return ((1 - np.asarray(spins)) // 2).astype(np.int8)


def bits_to_spins(bits) -> np.ndarray:
    return (1 - 2 * np.asarray(bits)).astype(np.int8)


def _index_weights(n: int) -> np.ndarray:
    if n > 62:
        raise ValueError(f"index encoding supports at most 62 spins, got {n}")
    return np.left_shift(np.int64(1), np.arange(n - 1, -1, -1, dtype=np.int64))


def spins_to_indices(states) -> np.ndarray:
    """Pack ``(..., n)`` spin configurations into integer indices."""
    bits = spins_to_bits(states).astype(np.int64)
    return bits @ _index_weights(bits.shape[-1])


def indices_to_spins(indices, n: int) -> np.ndarray:
    """Unpack integer indices into ``(..., n)`` spin configurations."""
    idx = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (idx[..., None] >> shifts) & 1
    return bits_to_spins(bits)


def spin_to_index(spins) -> int:
    return int(spins_to_indices(np.asarray(spins)[None, :])[0])


def index_to_spins(index: int, n: int) -> np.ndarray:
    return indices_to_spins(np.asarray([index]), n)[0]


def bitstring(spins) -> str:
    return "".join(str(b) for b in spins_to_bits(spins))


def random_spin_state(n: int, rng: np.random.Generator) -> np.ndarray:
    return bits_to_spins(rng.integers(0, 2, size=n))


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

def energy(instance: IsingInstance, spins) -> float:
    """Energy -sum_{j>k} J_jk s_j s_k - sum_j h_j s_j of a configuration."""
    s = np.asarray(spins, dtype=np.float64)
    if s.shape != (instance.n,):
        raise ValueError(f"state has length {s.shape}, instance has n = {instance.n}")
    return float(-0.5 * s @ (instance.couplings @ s) - instance.fields @ s)


def energies(instance: IsingInstance, states) -> np.ndarray:
    """Vectorized energy for a ``(B, n)`` batch of configurations."""
    S = np.asarray(states, dtype=np.float64)
    if S.shape[-1] != instance.n:
        raise ValueError(f"states have {S.shape[-1]} spins, instance has n = {instance.n}")
    return -0.5 * np.einsum("...i,...i->...", S @ instance.couplings, S) - S @ instance.fields


def magnetisation(spins) -> float:
    """Mean spin value, in [-1, 1]."""
    return float(np.mean(np.asarray(spins, dtype=np.float64)))


def hamming_distance(spins, other) -> int:
    """Number of positions where the two configurations differ."""
    a = np.asarray(spins)
    b = np.asarray(other)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def acceptance_ratio(instance: IsingInstance, spins, proposed, temperature: float) -> float:
    """Metropolis acceptance min(1, exp((E - E')/T)); never touches the partition function."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    delta = energy(instance, proposed) - energy(instance, spins)
    if delta <= 0.0:
        return 1.0
    return float(math.exp(-delta / temperature))


# ---------------------------------------------------------------------------
# Exact enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactDistribution:
    """Brute-force Boltzmann distribution over all 2^n configurations."""

    temperature: float
    energies: np.ndarray
    probabilities: np.ndarray
    partition_function: float
    log_partition_function: float
    boltzmann_magnetisation: float
    boltzmann_energy: float
    sorted_levels: tuple  # ((state index, energy), ...) ascending in energy

    @property
    def min_probability(self) -> float:
        return float(self.probabilities.min())

    @property
    def ground_energy(self) -> float:
        return self.sorted_levels[0][1]

    @property
    def ground_index(self) -> int:
        return self.sorted_levels[0][0]


@dataclass(frozen=True)
class ExactSummary:
    """Scalar digest of an ExactDistribution (no 2^n arrays retained)."""

    temperature: float
    log_partition_function: float
    boltzmann_magnetisation: float
    boltzmann_energy: float
    min_probability: float
    sorted_levels: tuple

    @property
    def ground_energy(self) -> float:
        return self.sorted_levels[0][1]


def exact_distribution(
    instance: IsingInstance,
    temperature: float,
    levels: int = 16,
    cap: int = ENUMERATION_CAP,
) -> ExactDistribution:
    """Enumerate all 2^n states; exact probabilities, Z, means and low levels.

    The enumeration runs in fixed-size chunks, so the result is deterministic
    and memory stays bounded by the output arrays themselves.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    n = instance.n
    if n > cap:
        raise ResourceLimitError(
            f"exact enumeration is capped at {cap} spins, got n = {n}"
        )
    size = 1 << n
    all_energies = np.empty(size)
    for lo in range(0, size, _CHUNK):
        hi = min(lo + _CHUNK, size)
        S = indices_to_spins(np.arange(lo, hi, dtype=np.int64), n).astype(np.float64)
        all_energies[lo:hi] = energies(instance, S)

    e_min = float(all_energies.min())
    probs = np.exp(-(all_energies - e_min) / temperature)
    shifted_sum = float(probs.sum())
    probs /= shifted_sum
    log_z = math.log(shifted_sum) - e_min / temperature
    try:
        z = math.exp(log_z)
    except OverflowError:
        z = math.inf

    mag_mean = 0.0
    for lo in range(0, size, _CHUNK):
        hi = min(lo + _CHUNK, size)
        S = indices_to_spins(np.arange(lo, hi, dtype=np.int64), n).astype(np.float64)
        mag_mean += float(probs[lo:hi] @ S.mean(axis=1))
    energy_mean = float(probs @ all_energies)

    k = min(levels, size)
    low = np.argpartition(all_energies, k - 1)[:k]
    low = low[np.argsort(all_energies[low], kind="stable")]
    sorted_levels = tuple((int(i), float(all_energies[i])) for i in low)

    return ExactDistribution(
        temperature=float(temperature),
        energies=all_energies,
        probabilities=probs,
        partition_function=z,
        log_partition_function=log_z,
        boltzmann_magnetisation=mag_mean,
        boltzmann_energy=energy_mean,
        sorted_levels=sorted_levels,
    )


def exact_summary(
    instance: IsingInstance,
    temperature: float,
    levels: int = 16,
    cap: int = ENUMERATION_CAP,
) -> ExactSummary:
    """Like :func:`exact_distribution` but drops the 2^n arrays after use."""
    dist = exact_distribution(instance, temperature, levels=levels, cap=cap)
    return ExactSummary(
        temperature=dist.temperature,
        log_partition_function=dist.log_partition_function,
        boltzmann_magnetisation=dist.boltzmann_magnetisation,
        boltzmann_energy=dist.boltzmann_energy,
        min_probability=dist.min_probability,
        sorted_levels=dist.sorted_levels,
    )


# ---------------------------------------------------------------------------
# Instance generation and files
# ---------------------------------------------------------------------------

def generate_instance(n: int, model_class: str, seed: int) -> IsingInstance:
    """Random instance with i.i.d. standard-normal couplings and fields.

    ``fully_connected`` draws every j > k coupling; ``one_d_ring`` draws only
    the cyclic nearest-neighbour couplings.  Couplings are drawn before
    fields, in a fixed edge order, so results are reproducible from the seed.
    """
    if n < 2:
        raise ValueError(f"need at least 2 spins, got n = {n}")
    if model_class not in MODEL_CLASSES:
        raise ValueError(f"unknown model class {model_class!r}, expected one of {MODEL_CLASSES}")
    rng = np.random.default_rng(seed)
    J = np.zeros((n, n))
    if model_class == "fully_connected":
        rows, cols = np.triu_indices(n, k=1)
        J[rows, cols] = rng.standard_normal(rows.size)
        J += J.T
    else:
        edges = []
        for i in range(n):
            j, k = max(i, (i + 1) % n), min(i, (i + 1) % n)
            if (j, k) not in edges:
                edges.append((j, k))
        values = rng.standard_normal(len(edges))
        for (j, k), v in zip(edges, values):
            J[j, k] = J[k, j] = v
    h = rng.standard_normal(n)
    return IsingInstance(
        n=n,
        couplings=J,
        fields=h,
        instance_id=f"{model_class}-n{n}-s{seed}",
        model_class=model_class,
        seed=seed,
    )


def save_instance(instance: IsingInstance, path) -> None:
    """Write the self-contained text format (j > k triples plus field vector)."""
    lines = [
        "# ising instance v1",
        f"instance_id {instance.instance_id}",
        f"n {instance.n}",
        f"model_class {instance.model_class}",
        f"seed {'none' if instance.seed is None else instance.seed}",
        "distribution standard_normal",
    ]
    rows, cols = np.tril_indices(instance.n, k=-1)
    triples = [
        (int(j), int(k), float(instance.couplings[j, k]))
        for j, k in zip(rows, cols)
        if instance.couplings[j, k] != 0.0
    ]
    lines.append(f"couplings {len(triples)}")
    for j, k, v in triples:
        lines.append(f"{j} {k} {v!r}")
    lines.append(f"fields {instance.n}")
    for i in range(instance.n):
        lines.append(f"{i} {float(instance.fields[i])!r}")
    lines.append("end")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path) -> IsingInstance:
    """Parse an instance file written by :func:`save_instance`."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    meta: dict[str, str] = {}
    pos = 0
    while pos < len(lines) and not lines[pos].startswith("couplings"):
        key, _, value = lines[pos].partition(" ")
        meta[key] = value
        pos += 1
    n = int(meta["n"])
    J = np.zeros((n, n))
    count = int(lines[pos].split()[1])
    pos += 1
    for _ in range(count):
        j_s, k_s, v_s = lines[pos].split()
        j, k = int(j_s), int(k_s)
        J[j, k] = J[k, j] = float(v_s)
        pos += 1
    if not lines[pos].startswith("fields"):
        raise ValueError(f"malformed instance file {path}: expected fields section")
    pos += 1
    h = np.zeros(n)
    for _ in range(n):
        i_s, v_s = lines[pos].split()
        h[int(i_s)] = float(v_s)
        pos += 1
    seed_raw = meta.get("seed", "none")
    return IsingInstance(
        n=n,
        couplings=J,
        fields=h,
        instance_id=meta.get("instance_id", ""),
        model_class=meta.get("model_class", "custom"),
        seed=None if seed_raw == "none" else int(seed_raw),
    )
