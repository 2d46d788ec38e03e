"""Wick-ordered nonlinear wave dynamics and Gibbs-measure verification on T^2."""

from .fields import (
    GridField,
    SobolevNormSpec,
    SpectralField,
    alias_free_grid,
    from_grid,
    project,
    sobolev_norm,
    to_grid,
)
from .free_field import (
    MuParams,
    PhaseState,
    chaos_second_moment,
    chaos_spectrum,
    covariance_field,
    point_variance,
    sample_free_field,
)
from .wick import (
    WickContext,
    hermite,
    hermite_values,
    scaling_identity_check,
    wick_binomial,
    wick_power,
)
from .dynamics import (
    DynParams,
    IntegrationError,
    Trajectory,
    default_dt,
    evolve,
    hamiltonian_wick,
    linear_propagate,
    nonlinear_force,
    quadratic_energy,
    step,
)
from .gibbs import (
    ChainOptions,
    GibbsSample,
    importance_weights,
    rn_moment_study,
    sample_gibbs,
    single_mode_moment_quadrature,
    wick_mass,
    wick_potential,
)
from .experiments import (
    DEFAULT_OBSERVABLES,
    NONLINEARITIES,
    ChaosReport,
    InvarianceReport,
    Nonlinearity,
    UniversalityReport,
    chaos_convergence_study,
    counterterm_mass,
    evolve_scaled,
    hermite_moment_study,
    invariance_test,
    universality_experiment,
)

__version__ = "0.1.0"
