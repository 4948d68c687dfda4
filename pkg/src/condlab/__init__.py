"""Numerical laboratory for random walks among random conductances."""

from .lattice import EXTERIOR, Boundary, Lattice, bonds, neighbors
from .environment import (
    EnvLaw,
    Environment,
    conductance,
    constant_environment,
    environment_from_weights,
    min_omega,
    monotone_couple,
    sample_environment,
)
from .operators import (
    Mode,
    SparseOperator,
    Spectrum,
    assemble_generator,
    dirichlet_form,
    heat_kernel,
    heat_kernel_row,
    return_probabilities,
    spectrum,
    trace_heat,
)

from .walker import (
    MCEstimate,
    WalkPath,
    annealed_return_prob,
    estimate_return_prob,
    exit_statistics,
    simulate,
    simulate_many,
)
from .percolation import (
    ClusterLabeling,
    GoodField,
    Strip,
    ell_epsilon,
    good_clusters,
    isoperimetric_constant,
    strip_crossing,
)
from .bounds import (
    BoundReport,
    LatticePath,
    PathSet,
    carne_varopoulos,
    eta_path,
    good_pathset,
    poincare_bound,
    proposition_bound,
    saloffcoste_bound,
    sausage,
)
from .mixing import MixingReport, mixing_report, t1_exact, t1_upper_spectral, t2_bounds, t2_exact_small
from .localization import ClusterSpectrum, LocalizationProfile, cluster_spectrum, localization_profile
from .experiments import ConfigError, ExperimentConfig, ExponentFit, fit_exponent, run

__version__ = "0.1.0"
