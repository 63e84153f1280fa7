"""Dense statevector emulation of the transverse-field proposal evolution.

The proposal unitary is exp(-iHt) with H = (1-gamma)*alpha*H_prob + gamma*sum_j X_j,
where H_prob is diagonal in the computational basis and carries the group
couplings and fields.  Systems are small (q <= 12), so exact evolution goes
through an eigendecomposition of the dense real-symmetric H; a second-order
split-step mode exists to validate circuit-style product formulas.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInstanceError, ResourceLimitError
from .ising import bits_to_spins, index_to_spins, spins_to_bits

#: Largest qubit count for dense evolution (2^12 x 2^12 operators).
DENSE_QUBIT_CAP = 12

#: Hyperparameter ranges for the proposal evolution: continuous mixing weight
#: and integer evolution time.
GAMMA_RANGE = (0.25, 0.6)
TIME_RANGE = (2, 20)


@dataclass(frozen=True)
class ProposalHamiltonian:
    """Group couplings/fields plus mixing weight, evolution time and scale."""

    q: int
    couplings: np.ndarray
    fields: np.ndarray
    gamma: float
    time: float
    alpha: float

    def __post_init__(self):
        J = np.asarray(self.couplings, dtype=np.float64)
        h = np.asarray(self.fields, dtype=np.float64)
        if J.shape != (self.q, self.q) or h.shape != (self.q,):
            raise ValueError(f"expected {self.q}x{self.q} couplings and {self.q} fields")
        if not np.array_equal(J, J.T):
            raise ValueError("group couplings must be symmetric")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        object.__setattr__(self, "couplings", J)
        object.__setattr__(self, "fields", h)


def sample_hyperparameters(
    rng: np.random.Generator,
    gamma_range: tuple[float, float] = GAMMA_RANGE,
    time_range: tuple[int, int] = TIME_RANGE,
) -> tuple[float, int]:
    """Draw (gamma, t): gamma uniform on its open interval, t a uniform integer."""
    gamma = rng.uniform(*gamma_range)
    t = int(rng.integers(time_range[0], time_range[1] + 1))
    return gamma, t


def alpha_normalization(couplings, fields) -> float:
    """Scale sqrt(q)/sqrt(sum_{j>k} J~^2 + sum_j h~^2 ) balancing problem and mixer terms."""
    J = np.asarray(couplings, dtype=np.float64)
    h = np.asarray(fields, dtype=np.float64)
    q = h.shape[0]
    scale = float(np.sum(np.triu(J, k=1) ** 2) + np.sum(h**2))
    if scale == 0.0:
        raise DegenerateInstanceError("all couplings and fields are zero")
    return math.sqrt(q) / math.sqrt(scale)


def default_slices(time: float) -> int:
    """Default split-step count for a given evolution time."""
    return max(1, math.ceil(10 * time))


@functools.lru_cache(maxsize=None)
def _mixer(q: int) -> np.ndarray:
    """Dense sum_j X_j on q qubits."""
    dim = 1 << q
    m = np.zeros((dim, dim))
    idx = np.arange(dim)
    for j in range(q):
        m[idx, idx ^ (1 << (q - 1 - j))] += 1.0
    m.flags.writeable = False
    return m


@functools.lru_cache(maxsize=None)
def _basis_spins(q: int) -> np.ndarray:
    """(2^q, q) matrix of spin values for every basis state, in index order."""
    from .ising import indices_to_spins

    s = indices_to_spins(np.arange(1 << q, dtype=np.int64), q).astype(np.float64)
    s.flags.writeable = False
    return s


def diagonal_energies(couplings, fields) -> np.ndarray:
    """Basis-state energies of the group Hamiltonian, in index order."""
    J = np.asarray(couplings, dtype=np.float64)
    h = np.asarray(fields, dtype=np.float64)
    S = _basis_spins(h.shape[0])
    return -0.5 * np.einsum("xi,xi->x", S @ J, S) - S @ h


def dense_hamiltonian(ham: ProposalHamiltonian) -> np.ndarray:
    """(1-gamma)*alpha*diag(E) + gamma*sum_j X_j as a dense real-symmetric matrix."""
    diag = (1.0 - ham.gamma) * ham.alpha * diagonal_energies(ham.couplings, ham.fields)
    return np.diag(diag) + ham.gamma * _mixer(ham.q)


def _check_cap(q: int, cap: int) -> None:
    if q > cap:
        raise ResourceLimitError(f"dense evolution is capped at {cap} qubits, got q = {q}")


def _input_index(input_bits, q: int) -> int:
    bits = np.asarray(input_bits, dtype=np.int64)
    if bits.shape != (q,) or np.any((bits != 0) & (bits != 1)):
        raise ValueError(f"input must be {q} bits")
    return int(bits @ (1 << np.arange(q - 1, -1, -1, dtype=np.int64)))


def evolve_exact(
    ham: ProposalHamiltonian, input_bits, cap: int = DENSE_QUBIT_CAP
) -> np.ndarray:
    """exp(-iHt)|input> via eigendecomposition of the dense Hamiltonian."""
    _check_cap(ham.q, cap)
    idx = _input_index(input_bits, ham.q)
    w, V = np.linalg.eigh(dense_hamiltonian(ham))
    return V @ (np.exp(-1j * w * ham.time) * V[idx, :])


def evolve_trotter(
    ham: ProposalHamiltonian, input_bits, slices: int | None = None, cap: int = DENSE_QUBIT_CAP
) -> np.ndarray:
    """Second-order split-step evolution: half diagonal, full mixer, half diagonal per slice."""
    _check_cap(ham.q, cap)
    if slices is None:
        slices = default_slices(ham.time)
    if slices < 1:
        raise ValueError(f"slices must be >= 1, got {slices}")
    q = ham.q
    idx = _input_index(input_bits, q)
    tau = ham.time / slices
    diag = (1.0 - ham.gamma) * ham.alpha * diagonal_energies(ham.couplings, ham.fields)
    half_phase = np.exp(-0.5j * tau * diag)
    c = math.cos(ham.gamma * tau)
    s = math.sin(ham.gamma * tau)

    psi = np.zeros(1 << q, dtype=np.complex128)
    psi[idx] = 1.0
    for _ in range(slices):
        psi *= half_phase
        grid = psi.reshape((2,) * q)
        for j in range(q):
            grid = c * grid - 1j * s * np.flip(grid, axis=j)
        psi = grid.reshape(-1)
        psi *= half_phase
    return psi


def measure_sample(psi: np.ndarray, rng: np.random.Generator, atol: float = 1e-6) -> np.ndarray:
    """One computational-basis measurement; returns the outcome as a bit vector."""
    probs = np.abs(np.asarray(psi)) ** 2
    total = probs.sum()
    if abs(total - 1.0) > atol:
        raise ValueError(f"statevector is not normalized: sum of probabilities {total}")
    cdf = np.cumsum(probs / total)
    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
    idx = min(idx, probs.size - 1)
    q = int(round(math.log2(probs.size)))
    return spins_to_bits(index_to_spins(idx, q))


def proposal_distribution_row(
    ham: ProposalHamiltonian, input_bits, cap: int = DENSE_QUBIT_CAP
) -> np.ndarray:
    """|<s'|U|s>|^2 for every s'; one row of the single-evolution proposal matrix."""
    return np.abs(evolve_exact(ham, input_bits, cap=cap)) ** 2


def dump_statevector(psi: np.ndarray, fh) -> None:
    """Write (index, real, imaginary) lines for cross-validation of amplitudes."""
    for i, a in enumerate(np.asarray(psi)):
        fh.write(f"{i} {float(a.real)!r} {float(a.imag)!r}\n")


def measurement_bits_to_spins(bits) -> np.ndarray:
    """Convenience: measured bit vector back to a spin configuration."""
    return bits_to_spins(bits)
