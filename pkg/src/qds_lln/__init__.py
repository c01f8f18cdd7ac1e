"""Numerical checks of the law of large numbers for random quantum dynamical semigroups."""
from .distributions import (
    ConfigurationError,
    DiscreteMixture,
    Parametric,
    dephasing_generator,
    dephasing_mixture,
    mean_generator,
    norm_bound,
    sample_generator,
)
from .engine import (
    GridSpec,
    chernoff_iterate,
    compose_random_iterates,
    exceedance_probability,
    expected_composition,
    lagrange_bounds_check,
    mean_map,
    semigroup_map,
    sup_over_grid,
    variance_estimate,
)
from .gkls import (
    GklsGenerator,
    Picture,
    Superoperator,
    check_cptp,
    choi_matrix,
    gell_mann_basis,
    kossakowski_to_lindblad,
    make_kossakowski,
    make_lindblad,
)

__version__ = "0.1.0"
