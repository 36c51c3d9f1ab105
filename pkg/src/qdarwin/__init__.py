"""Quantum Darwinism toolkit: redundancy of system information in
branching and Haar-random universes."""

from .branching import (
    BranchingState,
    SystemAmplitudes,
    exact_pip,
    fragment_decoherence,
    ghz_branching_state,
    hadamard_amplitudes,
    mutual_information,
    reduced_density,
    sample_branching_state,
    thermal_amplitudes,
)
from .errors import ConvergenceError, GuardError, InvalidInputError, NumericalError, QDarwinError
from .haar_ensemble import Pip, UniverseSpec, haar_pip_analytic, haar_pip_montecarlo, page_mean_entropy
from .qmath import RngStream
from .redundancy import (
    InfoDecomposition,
    RedundancyReport,
    decompose_information,
    ensemble_redundancy,
    n_delta,
    r_delta,
    scaled_pip,
    specific_redundancy_sweep,
    sufficient_threshold,
)
from .theory import (
    DFactorStats,
    approx_entropy,
    approx_pip,
    approx_specific_redundancy,
    d_factor_stats,
    entropy_correction_leading,
    h_series,
    mean_fragment_size,
    thumbnail_specific_redundancy,
)

__version__ = "0.1.0"
