"""Transition matrices, spectral gaps, mixing-time bounds, and scaling fits.

The proposal matrix Q is either analytic (classical strategies), estimated
row-wise by averaging exact single-evolution distributions over sampled
hyperparameters (single-evolution quantum strategies), or estimated by brute
force from independent proposal steps (the sequential multi-group strategy,
whose rows cannot be computed in closed form).  Metropolis acceptance factors
then give P = A o Q with the rejected mass restored on the diagonal.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import emulator
from .emulator import ProposalHamiltonian
from .errors import ReducibleChainWarning, ResourceLimitError
from .ising import IsingInstance, energies, indices_to_spins
from .proposals import (
    FullQuantumProposal,
    MultiGroupQuantumProposal,
    ProposalStrategy,
    SingleGroupQuantumProposal,
    _safe_alpha,
    select_group,
)

#: Largest spin count for transition-matrix work (2^10 x 2^10 dense eigenproblems).
SPECTRAL_CAP = 10

_UNIT_ATOL = 1e-6


@dataclass
class TransitionMatrix:
    """Estimated proposal matrix, acceptance factors, their product, and spectra."""

    n: int
    strategy_label: str
    temperature: float
    proposal: np.ndarray
    acceptance: np.ndarray
    transition: np.ndarray
    eigenvalues: np.ndarray
    gap: float
    asymmetry: float
    n_samples: int
    reducible: bool
    samples: list | None = None


@dataclass(frozen=True)
class ThermalisationBounds:
    """Analytic bracket on the steps needed to come within epsilon of stationarity."""

    epsilon: float
    lower: float
    upper: float
    min_mu: float


@dataclass(frozen=True)
class ScalingFit:
    """Weighted least-squares fit of gap = a * 2^(-k n)."""

    prefactor: float
    exponent: float
    exponent_err: float
    n_points: int


# ---------------------------------------------------------------------------
# Spectral gap
# ---------------------------------------------------------------------------

def _gap_from_eigenvalues(eigenvalues: np.ndarray) -> tuple[float, bool]:
    eigs = np.asarray(eigenvalues)
    unit = np.nonzero(np.abs(eigs - 1.0) <= _UNIT_ATOL)[0]
    if unit.size == 0:
        drop = int(np.argmax(eigs.real))
    else:
        drop = int(unit[np.argmax(eigs.real[unit])])
    rest = np.delete(eigs, drop)
    gap = 1.0 - float(np.max(np.abs(rest))) if rest.size else 1.0
    return max(gap, 0.0), unit.size > 1


def spectral_gap(transition) -> float:
    """Absolute spectral gap 1 - max_{lambda != 1} |lambda| of a row-stochastic matrix.

    Exactly one unit eigenvalue (the one of largest real part among those
    within 1e-6 of 1) is excluded; a second such eigenvalue signals a
    reducible chain and raises :class:`ReducibleChainWarning`.
    """
    if isinstance(transition, TransitionMatrix):
        eigs = transition.eigenvalues
    else:
        eigs = scipy.linalg.eigvals(np.asarray(transition, dtype=np.float64))
    gap, reducible = _gap_from_eigenvalues(eigs)
    if reducible:
        warnings.warn(
            "more than one unit-modulus eigenvalue: chain looks reducible",
            ReducibleChainWarning,
            stacklevel=2,
        )
    return gap


# ---------------------------------------------------------------------------
# Matrix assembly
# ---------------------------------------------------------------------------

def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise ResourceLimitError(
            f"transition-matrix analysis is capped at {cap} spins, got n = {n}"
        )


def _state_energies(instance: IsingInstance) -> np.ndarray:
    states = indices_to_spins(np.arange(1 << instance.n, dtype=np.int64), instance.n)
    return energies(instance, states.astype(np.float64))


def acceptance_matrix(state_energies: np.ndarray, temperature: float) -> np.ndarray:
    """Metropolis factors min(1, exp((E_i - E_j)/T)) for every ordered state pair."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    e = np.asarray(state_energies, dtype=np.float64)
    return np.exp(np.minimum(0.0, (e[:, None] - e[None, :]) / temperature))


def transition_from_proposal(
    instance: IsingInstance,
    proposal: np.ndarray,
    temperature: float,
    strategy_label: str,
    n_samples: int = 0,
    asymmetry: float | None = None,
    samples: list | None = None,
) -> TransitionMatrix:
    """Assemble P = A o Q with rejected mass on the diagonal, and its spectrum."""
    Q = np.asarray(proposal, dtype=np.float64)
    A = acceptance_matrix(_state_energies(instance), temperature)
    P = Q * A
    np.fill_diagonal(P, P.diagonal() + (1.0 - P.sum(axis=1)))
    eigs = scipy.linalg.eigvals(P)
    gap, reducible = _gap_from_eigenvalues(eigs)
    if asymmetry is None:
        asymmetry = float(np.max(np.abs(Q - Q.T)))
    return TransitionMatrix(
        n=instance.n,
        strategy_label=strategy_label,
        temperature=float(temperature),
        proposal=Q,
        acceptance=A,
        transition=P,
        eigenvalues=eigs,
        gap=gap,
        asymmetry=asymmetry,
        n_samples=n_samples,
        reducible=reducible,
    )


def build_P_classical(
    instance: IsingInstance,
    kind: str,
    temperature: float,
    cap: int = SPECTRAL_CAP,
) -> TransitionMatrix:
    """Exact transition matrix for the uniform or single-flip proposal."""
    _check_cap(instance.n, cap)
    d = 1 << instance.n
    if kind == "uniform":
        Q = np.full((d, d), 1.0 / d)
    elif kind == "local_flip":
        Q = np.zeros((d, d))
        idx = np.arange(d, dtype=np.int64)
        for p in range(instance.n):
            Q[idx, idx ^ (1 << (instance.n - 1 - p))] = 1.0 / instance.n
    else:
        raise ValueError(f"no analytic proposal matrix for kind {kind!r}")
    return transition_from_proposal(instance, Q, temperature, kind, asymmetry=0.0)


# ---------------------------------------------------------------------------
# Quantum proposal matrices
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _subspace_indices(n: int, group: tuple) -> tuple[np.ndarray, np.ndarray]:
    """Full-space indices arranged as (environment config, group config)."""
    members = set(group)
    env = np.array([p for p in range(n) if p not in members], dtype=np.int64)
    q = len(group)
    e = np.arange(1 << env.size, dtype=np.int64)
    x = np.arange(1 << q, dtype=np.int64)
    full = np.zeros((e.size, x.size), dtype=np.int64)
    for a, pos in enumerate(env):
        full += (((e >> (env.size - 1 - a)) & 1) << (n - 1 - pos))[:, None]
    for b, pos in enumerate(group):
        full += (((x >> (q - 1 - b)) & 1) << (n - 1 - pos))[None, :]
    full.flags.writeable = False
    env.flags.writeable = False
    return full, env


def _unitary_block(j_red, h_red, gamma, t, evolution, slices):
    """Row-stochastic |<x'|U|x>|^2 block for one group Hamiltonian."""
    ham = ProposalHamiltonian(
        q=len(h_red), couplings=j_red, fields=h_red,
        gamma=gamma, time=t, alpha=_safe_alpha(j_red, h_red),
    )
    dim = 1 << ham.q
    if evolution == "trotter":
        U = np.empty((dim, dim), dtype=np.complex128)
        for i in range(dim):
            bits = (i >> np.arange(ham.q - 1, -1, -1, dtype=np.int64)) & 1
            U[:, i] = emulator.evolve_trotter(ham, bits, slices=slices)
        return np.abs(U.T) ** 2
    w, V = np.linalg.eigh(emulator.dense_hamiltonian(ham))
    U = (V * np.exp(-1j * w * t)) @ V.T
    return np.abs(U.T) ** 2


def _stacked_blocks(j_red, h_red_stack, gamma, t):
    """Blocks for one group coupling matrix across many environment field vectors."""
    dim = 1 << h_red_stack.shape[1]
    basis = emulator._basis_spins(h_red_stack.shape[1])
    diag = -0.5 * np.einsum("xi,ij,xj->x", basis, j_red, basis)[None, :] - h_red_stack @ basis.T
    scale = float(np.sum(np.triu(j_red, k=1) ** 2))
    scales = scale + np.einsum("ei,ei->e", h_red_stack, h_red_stack)
    alphas = np.where(scales > 0, np.sqrt(h_red_stack.shape[1]) / np.sqrt(np.maximum(scales, 1e-300)), 1.0)
    H = np.zeros((h_red_stack.shape[0], dim, dim))
    rows = np.arange(dim)
    H[:, rows, rows] = (1.0 - gamma) * alphas[:, None] * diag
    H += gamma * emulator._mixer(h_red_stack.shape[1])
    w, V = np.linalg.eigh(H)
    U = np.einsum("eik,ek,ejk->eij", V, np.exp(-1j * w * t), V)
    return np.abs(U.transpose(0, 2, 1)) ** 2


def _sample_matrix(instance: IsingInstance, strategy, rng) -> np.ndarray:
    """One full proposal matrix for a single draw of (group, gamma, t)."""
    n = instance.n
    d = 1 << n
    if isinstance(strategy, FullQuantumProposal):
        gamma, t = strategy._sample(rng)
        return _unitary_block(
            instance.couplings, instance.fields, gamma, t, strategy.evolution, strategy.slices
        )
    group = select_group(n, strategy.q, rng)
    gamma, t = strategy._sample(rng)
    full, env_positions = _subspace_indices(n, tuple(int(g) for g in group.indices))
    j_red = instance.couplings[np.ix_(group.indices, group.indices)]
    Q = np.zeros((d, d))
    if strategy.mode == "naive" and strategy.evolution == "exact":
        block = _unitary_block(
            j_red, instance.fields[group.indices], gamma, t, "exact", None
        )
        for e in range(full.shape[0]):
            Q[np.ix_(full[e], full[e])] = block
        return Q
    env_spins = indices_to_spins(np.arange(full.shape[0], dtype=np.int64), env_positions.size)
    if strategy.mode == "improved":
        cross = instance.couplings[np.ix_(group.indices, env_positions)]
        h_stack = instance.fields[group.indices][None, :] + env_spins.astype(np.float64) @ cross.T
    else:
        h_stack = np.broadcast_to(
            instance.fields[group.indices], (full.shape[0], group.indices.size)
        ).copy()
    if strategy.evolution == "exact":
        blocks = _stacked_blocks(j_red, h_stack, gamma, t)
        for e in range(full.shape[0]):
            Q[np.ix_(full[e], full[e])] = blocks[e]
    else:
        for e in range(full.shape[0]):
            Q[np.ix_(full[e], full[e])] = _unitary_block(
                j_red, h_stack[e], gamma, t, strategy.evolution, strategy.slices
            )
    return Q


def _sample_row(instance: IsingInstance, strategy, row: int, rng) -> np.ndarray:
    """One proposal row for a single draw, mirroring the per-row estimator."""
    n = instance.n
    d = 1 << n
    if isinstance(strategy, FullQuantumProposal):
        gamma, t = strategy._sample(rng)
        ham = ProposalHamiltonian(
            q=n, couplings=instance.couplings, fields=instance.fields,
            gamma=gamma, time=t,
            alpha=_safe_alpha(instance.couplings, instance.fields),
        )
        bits = (row >> np.arange(n - 1, -1, -1, dtype=np.int64)) & 1
        if strategy.evolution == "trotter":
            psi = emulator.evolve_trotter(ham, bits, slices=strategy.slices)
        else:
            psi = emulator.evolve_exact(ham, bits)
        return np.abs(psi) ** 2
    group = select_group(n, strategy.q, rng)
    gamma, t = strategy._sample(rng)
    full, env_positions = _subspace_indices(n, tuple(int(g) for g in group.indices))
    j_red = instance.couplings[np.ix_(group.indices, group.indices)]
    q = group.indices.size
    spins = indices_to_spins(np.asarray([row]), n)[0].astype(np.float64)
    if strategy.mode == "improved":
        h_red = instance.fields[group.indices] + (
            instance.couplings[group.indices, :] @ spins - j_red @ spins[group.indices]
        )
    else:
        h_red = instance.fields[group.indices].copy()
    block = _unitary_block(j_red, h_red, gamma, t, strategy.evolution, strategy.slices)
    group_bits = ((1 - spins[group.indices]) / 2).astype(np.int64)
    group_idx = int(group_bits @ (1 << np.arange(q - 1, -1, -1, dtype=np.int64)))
    env_bits = ((1 - spins[env_positions]) / 2).astype(np.int64)
    env_idx = int(env_bits @ (1 << np.arange(env_positions.size - 1, -1, -1, dtype=np.int64))) if env_positions.size else 0
    out = np.zeros(d)
    out[full[env_idx]] = block[group_idx]
    return out


def build_Q_quantum_rowwise(
    instance: IsingInstance,
    strategy: ProposalStrategy,
    temperature: float,
    samples_per_row: int = 30,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    paired: bool = True,
    cap: int = SPECTRAL_CAP,
    keep_samples: bool = False,
) -> TransitionMatrix:
    """Monte-Carlo proposal matrix for single-evolution strategies.

    In paired mode each sampled (group, gamma, t) is reused across the whole
    matrix, so the estimator is symmetric by construction; independent mode
    draws fresh hyperparameters per row instead.
    """
    if not isinstance(strategy, (FullQuantumProposal, SingleGroupQuantumProposal)):
        raise ValueError(
            f"row-wise estimation needs a single-evolution strategy, got {strategy.kind}"
        )
    _check_cap(instance.n, cap)
    if rng is None:
        rng = np.random.default_rng(seed)
    d = 1 << instance.n
    if paired:
        Q = np.zeros((d, d))
        kept = [] if keep_samples else None
        for _ in range(samples_per_row):
            sample = _sample_matrix(instance, strategy, rng)
            Q += sample
            if kept is not None:
                kept.append(sample)
        Q /= samples_per_row
        # each sample is symmetric in exact arithmetic; symmetrizing removes
        # the float rounding so the declared symmetry is exact
        Q = 0.5 * (Q + Q.T)
        asymmetry = 0.0
    else:
        Q = np.zeros((d, d))
        kept = None
        for row in range(d):
            for _ in range(samples_per_row):
                Q[row] += _sample_row(instance, strategy, row, rng)
        Q /= samples_per_row
        asymmetry = float(np.max(np.abs(Q - Q.T)))
    tm = transition_from_proposal(
        instance, Q, temperature, strategy.label,
        n_samples=samples_per_row, asymmetry=asymmetry,
    )
    tm.samples = kept
    return tm


def build_Q_quantum_bruteforce(
    instance: IsingInstance,
    strategy: MultiGroupQuantumProposal,
    temperature: float,
    n_samples: int | None = None,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    cap: int = SPECTRAL_CAP,
    batch: int | None = None,
) -> TransitionMatrix:
    """Brute-force proposal matrix for the sequential multi-group strategy.

    Runs independent single proposal steps from uniform random starting
    states, each with fresh hyperparameters, and renormalizes the observed
    transition counts row by row.
    """
    if not isinstance(strategy, MultiGroupQuantumProposal):
        raise ValueError(f"brute-force estimation is for multi-group strategies, got {strategy.kind}")
    _check_cap(instance.n, cap)
    if rng is None:
        rng = np.random.default_rng(seed)
    n = instance.n
    d = 1 << n
    if n_samples is None:
        n_samples = d * d
    if batch is None:
        batch = int(min(65536, max(1024, 2**24 // 4 ** min(strategy.q, n))))
    counts = np.zeros((d, d))
    done = 0
    while done < n_samples:
        b = min(batch, n_samples - done)
        starts = rng.integers(0, d, size=b)
        states = indices_to_spins(starts, n)
        proposals = strategy.propose_batch(instance, states, rng)
        bits = ((1 - proposals.astype(np.int64)) // 2)
        outs = bits @ (1 << np.arange(n - 1, -1, -1, dtype=np.int64))
        np.add.at(counts, (starts, outs), 1.0)
        done += b
    mass = counts.sum(axis=1)
    empty = mass == 0
    if np.any(empty):
        warnings.warn(
            f"{int(empty.sum())} starting states were never sampled; their rows "
            "default to self-loops",
            ReducibleChainWarning,
            stacklevel=2,
        )
        counts[empty, np.nonzero(empty)[0]] = 1.0
        mass = counts.sum(axis=1)
    Q = counts / mass[:, None]
    return transition_from_proposal(
        instance, Q, temperature, strategy.label,
        n_samples=n_samples, asymmetry=float(np.max(np.abs(Q - Q.T))),
    )


# ---------------------------------------------------------------------------
# Mixing diagnostics
# ---------------------------------------------------------------------------

def thermalisation_bounds(delta: float, epsilon: float, min_mu: float) -> ThermalisationBounds:
    """Analytic bracket (1/d - 1) ln(1/2e) <= tau <= (1/d) ln(1/(e mu_min))."""
    if not 0 < delta <= 1:
        raise ValueError(f"spectral gap must lie in (0, 1], got {delta}")
    if not 0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    if not 0 < min_mu <= 1:
        raise ValueError(f"min_mu must lie in (0, 1], got {min_mu}")
    lower = (1.0 / delta - 1.0) * math.log(1.0 / (2.0 * epsilon))
    upper = (1.0 / delta) * math.log(1.0 / (epsilon * min_mu))
    return ThermalisationBounds(epsilon=epsilon, lower=lower, upper=upper, min_mu=min_mu)


def total_variation(p, q) -> float:
    """Total-variation distance between two distributions."""
    return 0.5 * float(np.sum(np.abs(np.asarray(p, dtype=np.float64) - np.asarray(q, dtype=np.float64))))


def worst_start_mixing_steps(
    transition: np.ndarray, stationary: np.ndarray, epsilon: float, max_steps: int = 100_000
) -> int | None:
    """First step where the worst-start TV distance drops below epsilon (matrix powers)."""
    P = np.asarray(transition, dtype=np.float64)
    mu = np.asarray(stationary, dtype=np.float64)
    M = np.eye(P.shape[0])
    for t in range(1, max_steps + 1):
        M = M @ P
        if 0.5 * np.max(np.abs(M - mu[None, :]).sum(axis=1)) < epsilon:
            return t
    return None


def detailed_balance_violation(tm: TransitionMatrix, probabilities: np.ndarray) -> float:
    """max_{s,s'} |mu(s) P(s'|s) - mu(s') P(s|s')|."""
    mu = np.asarray(probabilities, dtype=np.float64)
    flow = mu[:, None] * tm.transition
    return float(np.max(np.abs(flow - flow.T)))


def stationarity_deviation(tm: TransitionMatrix, probabilities: np.ndarray) -> float:
    """max |mu^T P - mu^T|."""
    mu = np.asarray(probabilities, dtype=np.float64)
    return float(np.max(np.abs(mu @ tm.transition - mu)))


def detailed_balance_noise_floor(
    tm: TransitionMatrix,
    instance: IsingInstance,
    probabilities: np.ndarray,
    n_bootstrap: int = 100,
    seed: int = 0,
    quantile: float = 0.95,
) -> float:
    """Bootstrap quantile of the detailed-balance violation under resampling.

    Requires a paired row-wise estimate built with ``keep_samples=True``; the
    per-draw matrices are resampled with replacement and reassembled.
    """
    if not tm.samples:
        raise ValueError("transition matrix has no stored per-draw samples")
    rng = np.random.default_rng(seed)
    stack = np.stack(tm.samples)
    violations = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        pick = rng.integers(0, stack.shape[0], size=stack.shape[0])
        Q = stack[pick].mean(axis=0)
        resampled = transition_from_proposal(
            instance, Q, tm.temperature, tm.strategy_label, n_samples=stack.shape[0]
        )
        violations[b] = detailed_balance_violation(resampled, probabilities)
    return float(np.quantile(violations, quantile))


# ---------------------------------------------------------------------------
# Scaling analysis
# ---------------------------------------------------------------------------

def ensemble_gap_stats(gaps) -> tuple[float, float, float]:
    """Arithmetic mean, standard error, and mean of log2 over an ensemble of gaps."""
    g = np.asarray(gaps, dtype=np.float64)
    mean = float(g.mean())
    sem = float(g.std(ddof=1) / math.sqrt(g.size)) if g.size > 1 else 0.0
    positive = g[g > 0]
    log_mean = float(np.mean(np.log2(positive))) if positive.size else math.nan
    return mean, sem, log_mean


def interpolate_sqrt_n_gap(gaps: dict[int, tuple[float, float]], n: int) -> tuple[float, float]:
    """Linear interpolation of (mean, err) at group size sqrt(n).

    ``gaps`` maps integer group sizes to (mean, err); the two integers
    bracketing sqrt(n) must be present unless sqrt(n) is itself an integer.
    """
    root = math.sqrt(n)
    nearest = round(root)
    if abs(root - nearest) < 1e-12:
        if nearest not in gaps:
            raise ValueError(f"sqrt({n}) = {nearest} but no entry for q = {nearest}")
        return gaps[nearest]
    lo, hi = math.floor(root), math.ceil(root)
    if lo not in gaps or hi not in gaps:
        raise ValueError(f"need entries for q = {lo} and q = {hi} to interpolate at sqrt({n})")
    w = root - lo
    mean = (1.0 - w) * gaps[lo][0] + w * gaps[hi][0]
    err = math.sqrt(((1.0 - w) * gaps[lo][1]) ** 2 + (w * gaps[hi][1]) ** 2)
    return mean, err


def fit_scaling(points) -> ScalingFit:
    """Weighted least squares of log2(gap) against n for gap = a * 2^(-k n).

    Weights come from the gap errors propagated into log space; with all
    errors zero the fit is unweighted.  Needs at least 3 distinct n values.
    """
    pts = [(float(n), float(g), float(e)) for n, g, e in points]
    xs = np.array([p[0] for p in pts])
    gaps = np.array([p[1] for p in pts])
    errs = np.array([p[2] for p in pts])
    if np.unique(xs).size < 3:
        raise ValueError("scaling fit needs at least 3 distinct n values")
    if np.any(gaps <= 0):
        raise ValueError("scaling fit needs positive gaps")
    ys = np.log2(gaps)
    if np.all(errs > 0):
        w = (gaps * math.log(2.0) / errs) ** 2
    else:
        w = np.ones_like(ys)
    sw = w.sum()
    swx = (w * xs).sum()
    swy = (w * ys).sum()
    swxy = (w * xs * ys).sum()
    swx2 = (w * xs * xs).sum()
    denom = sw * swx2 - swx * swx
    slope = (sw * swxy - swx * swy) / denom
    intercept = (swy * swx2 - swx * swxy) / denom
    if np.all(errs > 0):
        slope_var = sw / denom
    else:
        resid = ys - (intercept + slope * xs)
        dof = max(xs.size - 2, 1)
        slope_var = (resid @ resid / dof) * xs.size / denom
    return ScalingFit(
        prefactor=float(2.0**intercept),
        exponent=float(-slope),
        exponent_err=float(math.sqrt(max(slope_var, 0.0))),
        n_points=xs.size,
    )


def quantum_enhancement_factor(k_quantum: float, k_classical_best: float) -> float:
    """Ratio of the best classical decay exponent to the quantum one."""
    if k_quantum <= 0:
        raise ValueError(f"quantum exponent must be positive, got {k_quantum}")
    return k_classical_best / k_quantum
