"""disqme: ensemble-averaged dynamics of disordered quantum systems.

Builds the average dynamical map of an ensemble of static Hamiltonians,
extracts the time-local master equation (effective Hamiltonian, decoherence
matrix, rates, Lindblad operators) that generates it, and provides the
closed-form dephasing and depolarization laws for spectral and unitarily
invariant disorder, cross-validated against seeded Monte Carlo averages.
"""

from .analytic import (
    DepolarizationLaw,
    NoAverageHamiltonianError,
    QubitRatePair,
    ShortTimeModel,
    asymptotic_purity,
    depolarization_law,
    gue_rate_d2,
    pe_rate_closed_form,
    pe_rate_large_d,
    purity_evolution,
    qubit_coherence,
    qubit_rates,
    short_time_lindblad,
    spectral_master_equation,
    validity_horizon,
    validity_horizon_from_cumulants,
)
from .distributions import (
    CumulantVector,
    ScalarDistribution,
    UnsupportedDistributionError,
    cumulant_series_rates,
    cumulants_from_moments,
)
from .ensembles import (
    DisorderEnsemble,
    Realization,
    UnsupportedForKindError,
    chi_bar,
    chi_bar_deriv,
    finite_list_ensemble,
    gue_ensemble,
    haar_fourth_moment,
    haar_second_moment,
    haar_unitary,
    level_spacing_cf,
    poisson_ensemble,
    qubit_spectral,
    realizations,
    sample_realization,
    sample_spectra,
    spectral_general,
    spectral_global,
    spectral_uncorrelated,
)
from .extraction import (
    DynamicalMapSeries,
    ExtractionFailureError,
    GeneratorSeries,
    InconsistentGeneratorError,
    MasterEquationSeries,
    build_map_analytic,
    build_map_montecarlo,
    diagonalize_gamma,
    extract_generator,
    extract_master_equation,
    generator_to_lindblad,
    lindblad_operators,
)
from .operators import (
    ContractViolationError,
    DimensionError,
    HermitianBasis,
    bloch_state,
    check_density_matrix,
    choi_matrix,
    commutator_superop,
    conjugation_superop,
    devectorize,
    gell_mann_basis,
    random_density_matrix,
    vectorize,
)
from .propagation import (
    CannotPropagateThroughSingularityError,
    ComparisonError,
    ComparisonReport,
    Trajectory,
    average_direct,
    compare,
    observable_channels,
    propagate,
)

__version__ = "0.1.0"


def default_grid(ensemble, n_points: int = 400, t_max: float | None = None):
    """Uniform grid on [0, 3 pi/(sigma omega0)] (400 points by default).

    With 399 intervals the box-law rate singularities tau_n = 2 pi n/(sigma
    omega0) land exactly on grid points.
    """
    import numpy as np

    if t_max is None:
        t_max = 3.0 * np.pi / (ensemble.sigma_scale() * ensemble.omega0)
    return np.linspace(0.0, t_max, n_points)
