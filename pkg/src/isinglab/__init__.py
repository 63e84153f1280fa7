"""Markov chain Monte Carlo laboratory for Ising spin glasses.

Classical and quantum-emulated proposal strategies (including coarse-grained
multi-group updates), exact enumeration oracles, chain-convergence
experiments, and spectral-gap analysis of the resulting transition matrices.
"""

from .chain import (
    ChainSummary,
    ChainTrace,
    ProposalStatistics,
    proposal_statistics,
    run_chain,
    run_ensemble,
    summarize,
)
from .emulator import (
    DENSE_QUBIT_CAP,
    GAMMA_RANGE,
    TIME_RANGE,
    ProposalHamiltonian,
    alpha_normalization,
    evolve_exact,
    evolve_trotter,
    measure_sample,
    proposal_distribution_row,
    sample_hyperparameters,
)
from .errors import (
    ConfigError,
    DegenerateInstanceError,
    ReducibleChainWarning,
    ResourceLimitError,
)
from .ising import (
    ENUMERATION_CAP,
    ExactDistribution,
    ExactSummary,
    IsingInstance,
    acceptance_ratio,
    energy,
    exact_distribution,
    exact_summary,
    generate_instance,
    hamming_distance,
    load_instance,
    magnetisation,
    save_instance,
)
from .proposals import (
    FullQuantumProposal,
    GroupSelection,
    LocalFlipProposal,
    MultiGroupQuantumProposal,
    ProposalStrategy,
    SingleGroupQuantumProposal,
    UniformProposal,
    make_strategy,
    reduced_hamiltonian_improved,
    reduced_hamiltonian_naive,
    select_group,
)
from .spectral import (
    SPECTRAL_CAP,
    ScalingFit,
    ThermalisationBounds,
    TransitionMatrix,
    build_P_classical,
    build_Q_quantum_bruteforce,
    build_Q_quantum_rowwise,
    fit_scaling,
    interpolate_sqrt_n_gap,
    quantum_enhancement_factor,
    spectral_gap,
    thermalisation_bounds,
)

__version__ = "0.1.0"
