"""Proposal strategies: classical moves and coarse-grained quantum-emulated moves.

All strategies implement ``propose(instance, spins, rng) -> spins`` and are
stateless, so a single strategy object can serve any number of chains.  The
multi-group strategy additionally offers a vectorized ``propose_batch`` used
by the brute-force transition-matrix estimator; within one step its groups
are updated strictly in sequence, each seeing the measurement outcomes of the
groups before it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import emulator
from .emulator import (
    DENSE_QUBIT_CAP,
    GAMMA_RANGE,
    TIME_RANGE,
    ProposalHamiltonian,
    alpha_normalization,
    sample_hyperparameters,
)
from .errors import DegenerateInstanceError, ResourceLimitError
from .ising import (
    IsingInstance,
    bits_to_spins,
    indices_to_spins,
    random_spin_state,
    spins_to_bits,
)

STRATEGY_KINDS = (
    "uniform",
    "local_flip",
    "qemcmc_full",
    "cg_naive_local_group",
    "cg_improved_local_group",
    "cg_multiple_groups",
)


@dataclass(frozen=True)
class GroupSelection:
    """A contiguous (mod n) block of spin indices starting at a random offset."""

    indices: np.ndarray
    offset: int

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))


def select_group(n: int, q: int, rng: np.random.Generator) -> GroupSelection:
    """Pick q consecutive spin labels (mod n) from a uniformly random start."""
    if not 1 <= q <= n:
        raise ValueError(f"group size must satisfy 1 <= q <= n, got q = {q}, n = {n}")
    offset = int(rng.integers(0, n))
    return GroupSelection(indices=(offset + np.arange(q)) % n, offset=offset)


def partition_groups(n: int, q: int, offset: int) -> list[np.ndarray]:
    """Disjoint consecutive groups covering all spins; the last takes the remainder."""
    if not 1 <= q <= n:
        raise ValueError(f"group size must satisfy 1 <= q <= n, got q = {q}, n = {n}")
    count = math.ceil(n / q)
    groups = []
    for i in range(count):
        size = q if i < count - 1 else n - q * (count - 1)
        groups.append((offset + i * q + np.arange(size)) % n)
    return groups


def reduced_hamiltonian_naive(instance: IsingInstance, group: GroupSelection):
    """Restrict couplings and fields to the group, ignoring everything outside."""
    idx = group.indices
    return instance.couplings[np.ix_(idx, idx)].copy(), instance.fields[idx].copy()


def reduced_hamiltonian_improved(instance: IsingInstance, group: GroupSelection, spins):
    """Group restriction with the frozen environment folded into the fields.

    Each in-group field picks up sum_{j not in group} J_ij s_j, so energy
    differences between any two group configurations match the full model.
    """
    idx = group.indices
    s = np.asarray(spins, dtype=np.float64)
    j_red = instance.couplings[np.ix_(idx, idx)].copy()
    local = instance.couplings[idx, :] @ s - j_red @ s[idx]
    return j_red, instance.fields[idx] + local


def _safe_alpha(couplings, fields) -> float:
    # An all-zero reduced Hamiltonian contributes nothing to the evolution,
    # so any finite scale works; 1.0 keeps the mixer term intact.
    try:
        return alpha_normalization(couplings, fields)
    except DegenerateInstanceError:
        return 1.0


def _evolve_and_measure(
    couplings,
    fields,
    gamma: float,
    time: float,
    input_bits,
    rng: np.random.Generator,
    evolution: str,
    slices: int | None,
    cap: int,
) -> np.ndarray:
    ham = ProposalHamiltonian(
        q=len(fields),
        couplings=couplings,
        fields=fields,
        gamma=gamma,
        time=time,
        alpha=_safe_alpha(couplings, fields),
    )
    if evolution == "trotter":
        psi = emulator.evolve_trotter(ham, input_bits, slices=slices, cap=cap)
    else:
        psi = emulator.evolve_exact(ham, input_bits, cap=cap)
    return emulator.measure_sample(psi, rng)


class ProposalStrategy:
    """Base contract: stateless, pure given (instance, spins, rng)."""

    kind: str = ""
    symmetric_by_construction: bool = True

    def propose(self, instance: IsingInstance, spins, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    @property
    def label(self) -> str:
        return self.kind

    def describe(self) -> dict:
        return {"kind": self.kind}


class UniformProposal(ProposalStrategy):
    """Propose a state drawn uniformly from all 2^n configurations."""

    kind = "uniform"

    def propose(self, instance, spins, rng):
        return random_spin_state(instance.n, rng)


class LocalFlipProposal(ProposalStrategy):
    """Flip exactly one uniformly chosen spin."""

    kind = "local_flip"

    def propose(self, instance, spins, rng):
        out = np.array(spins, dtype=np.int8, copy=True)
        p = int(rng.integers(0, instance.n))
        out[p] = -out[p]
        return out


class _QuantumStrategy(ProposalStrategy):
    def __init__(
        self,
        gamma_range=GAMMA_RANGE,
        time_range=TIME_RANGE,
        evolution: str = "exact",
        slices: int | None = None,
        qubit_cap: int = DENSE_QUBIT_CAP,
    ):
        if evolution not in ("exact", "trotter"):
            raise ValueError(f"evolution must be 'exact' or 'trotter', got {evolution!r}")
        self.gamma_range = (float(gamma_range[0]), float(gamma_range[1]))
        self.time_range = (int(time_range[0]), int(time_range[1]))
        self.evolution = evolution
        self.slices = slices
        self.qubit_cap = qubit_cap

    def _sample(self, rng):
        return sample_hyperparameters(rng, self.gamma_range, self.time_range)

    def describe(self):
        out = {
            "kind": self.kind,
            "gamma_range": list(self.gamma_range),
            "t_range": list(self.time_range),
            "evolution": self.evolution,
        }
        if self.slices is not None:
            out["slices"] = self.slices
        return out


class FullQuantumProposal(_QuantumStrategy):
    """Evolve the whole system under its own Hamiltonian and measure once."""

    kind = "qemcmc_full"

    def propose(self, instance, spins, rng):
        if instance.n > self.qubit_cap:
            raise ResourceLimitError(
                f"full quantum proposal needs n <= {self.qubit_cap}, got n = {instance.n}"
            )
        gamma, t = self._sample(rng)
        bits = _evolve_and_measure(
            instance.couplings,
            instance.fields,
            gamma,
            t,
            spins_to_bits(spins),
            rng,
            self.evolution,
            self.slices,
            self.qubit_cap,
        )
        return bits_to_spins(bits)


class SingleGroupQuantumProposal(_QuantumStrategy):
    """Quantum update of one random q-spin group; the rest of the state is frozen."""

    kind = "cg_naive_local_group"

    def __init__(self, q: int, mode: str = "naive", **kwargs):
        super().__init__(**kwargs)
        if mode not in ("naive", "improved"):
            raise ValueError(f"mode must be 'naive' or 'improved', got {mode!r}")
        self.q = int(q)
        self.mode = mode
        self.kind = (
            "cg_improved_local_group" if mode == "improved" else "cg_naive_local_group"
        )

    @property
    def label(self):
        return f"{self.kind}_q{self.q}"

    def describe(self):
        out = super().describe()
        out["q"] = self.q
        return out

    def propose(self, instance, spins, rng):
        group = select_group(instance.n, self.q, rng)
        if self.mode == "improved":
            j_red, h_red = reduced_hamiltonian_improved(instance, group, spins)
        else:
            j_red, h_red = reduced_hamiltonian_naive(instance, group)
        gamma, t = self._sample(rng)
        bits = _evolve_and_measure(
            j_red,
            h_red,
            gamma,
            t,
            spins_to_bits(np.asarray(spins)[group.indices]),
            rng,
            self.evolution,
            self.slices,
            self.qubit_cap,
        )
        out = np.array(spins, dtype=np.int8, copy=True)
        out[group.indices] = bits_to_spins(bits)
        return out


class MultiGroupQuantumProposal(_QuantumStrategy):
    """Cover all spins with consecutive groups, updating them in sequence.

    Every step draws a fresh cyclic offset and fresh (gamma, t) per group;
    each group's reduced Hamiltonian folds in the current working state, so
    earlier measurement outcomes shape later groups.  Acceptance is not
    applied here: the chain driver accepts or rejects the fully updated state.
    """

    kind = "cg_multiple_groups"
    # Forward and reverse paths see different intermediate environments, so
    # exact Q-symmetry is not guaranteed; the estimator reports the residual.
    symmetric_by_construction = False

    def __init__(self, q: int, n_g: int | None = None, **kwargs):
        super().__init__(**kwargs)
        self.q = int(q)
        self.n_g = None if n_g is None else int(n_g)

    @property
    def label(self):
        return f"{self.kind}_q{self.q}"

    def describe(self):
        out = super().describe()
        out["q"] = self.q
        if self.n_g is not None:
            out["n_g"] = self.n_g
        return out

    def _check(self, n: int):
        if not 1 <= self.q <= n:
            raise ValueError(f"group size must satisfy 1 <= q <= n, got q = {self.q}, n = {n}")
        if self.n_g is not None and self.n_g * self.q < n:
            raise ValueError(
                f"declared n_g = {self.n_g} groups of q = {self.q} cannot cover n = {n} spins"
            )

    def propose(self, instance, spins, rng):
        self._check(instance.n)
        offset = int(rng.integers(0, instance.n))
        work = np.array(spins, dtype=np.int8, copy=True)
        for indices in partition_groups(instance.n, self.q, offset):
            group = GroupSelection(indices=indices, offset=offset)
            j_red, h_red = reduced_hamiltonian_improved(instance, group, work)
            gamma, t = self._sample(rng)
            bits = _evolve_and_measure(
                j_red,
                h_red,
                gamma,
                t,
                spins_to_bits(work[indices]),
                rng,
                self.evolution,
                self.slices,
                self.qubit_cap,
            )
            work[indices] = bits_to_spins(bits)
        return work

    def propose_batch(self, instance, states, rng):
        """Vectorized independent proposals for a (B, n) batch of states.

        Stacks the per-group eigendecompositions across the batch; each batch
        row is an independent single proposal step (no chain semantics).
        """
        self._check(instance.n)
        if self.evolution != "exact":
            return np.stack([self.propose(instance, s, rng) for s in states])
        n = instance.n
        J = instance.couplings
        h = instance.fields
        states = np.asarray(states)
        B = states.shape[0]
        work = states.astype(np.float64, copy=True)
        offsets = rng.integers(0, n, size=B)
        count = math.ceil(n / self.q)
        for gi in range(count):
            size = self.q if gi < count - 1 else n - self.q * (count - 1)
            idx = (offsets[:, None] + gi * self.q + np.arange(size)) % n
            j_red = J[idx[:, :, None], idx[:, None, :]]
            s_group = np.take_along_axis(work, idx, axis=1)
            local = np.take_along_axis(work @ J, idx, axis=1)
            h_red = h[idx] + local - np.einsum("bij,bj->bi", j_red, s_group)

            gammas = rng.uniform(*self.gamma_range, size=B)
            times = rng.integers(self.time_range[0], self.time_range[1] + 1, size=B)

            scale = np.einsum("bij,bij->b", np.triu(j_red, k=1), np.triu(j_red, k=1))
            scale += np.einsum("bi,bi->b", h_red, h_red)
            alphas = np.where(scale > 0, np.sqrt(size) / np.sqrt(np.maximum(scale, 1e-300)), 1.0)

            basis = emulator._basis_spins(size)
            diag = -0.5 * np.einsum("xi,bij,xj->bx", basis, j_red, basis) - h_red @ basis.T
            dim = 1 << size
            H = np.zeros((B, dim, dim))
            rows = np.arange(dim)
            H[:, rows, rows] = (1.0 - gammas)[:, None] * alphas[:, None] * diag
            H += gammas[:, None, None] * emulator._mixer(size)

            w, V = np.linalg.eigh(H)
            in_bits = ((1 - s_group) / 2).astype(np.int64)
            in_idx = in_bits @ (1 << np.arange(size - 1, -1, -1, dtype=np.int64))
            col = V[np.arange(B), in_idx, :]
            phases = np.exp(-1j * w * times[:, None])
            amp = np.einsum("bij,bj->bi", V, phases * col)
            probs = np.abs(amp) ** 2
            cdf = np.cumsum(probs, axis=1)
            u = rng.random(B)
            out_idx = np.minimum((cdf < u[:, None]).sum(axis=1), dim - 1)
            out_spins = indices_to_spins(out_idx, size).astype(np.float64)
            np.put_along_axis(work, idx, out_spins, axis=1)
        return work.astype(np.int8)


def make_strategy(
    kind: str,
    q: int | None = None,
    n_g: int | None = None,
    gamma_range=GAMMA_RANGE,
    t_range=TIME_RANGE,
    evolution: str = "exact",
    slices: int | None = None,
    qubit_cap: int = DENSE_QUBIT_CAP,
) -> ProposalStrategy:
    """Build a strategy from its configuration-file fields."""
    if kind == "uniform":
        return UniformProposal()
    if kind == "local_flip":
        return LocalFlipProposal()
    common = dict(
        gamma_range=gamma_range,
        time_range=t_range,
        evolution=evolution,
        slices=slices,
        qubit_cap=qubit_cap,
    )
    if kind == "qemcmc_full":
        return FullQuantumProposal(**common)
    if q is None:
        raise ValueError(f"strategy kind {kind!r} needs a group size q")
    if kind == "cg_naive_local_group":
        return SingleGroupQuantumProposal(q, mode="naive", **common)
    if kind == "cg_improved_local_group":
        return SingleGroupQuantumProposal(q, mode="improved", **common)
    if kind == "cg_multiple_groups":
        return MultiGroupQuantumProposal(q, n_g=n_g, **common)
    raise ValueError(f"unknown strategy kind {kind!r}, expected one of {STRATEGY_KINDS}")
