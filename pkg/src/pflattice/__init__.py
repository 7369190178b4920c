"""Product-formula simulation of 1D lattice Hamiltonians with exact error checks."""

from ._kernels import BACKEND
from .analysis import (
    ErrorReport,
    PowerLawFit,
    bound_first_order_commutator,
    bound_first_order_local,
    bound_ordering_robust,
    bound_swap,
    effective_order,
    error_report,
    exact_evolution,
    fit_power_law,
    measured_error,
    noisy_optimal_segments,
    segments_from_bound,
    segments_measured,
)
from .formulas import ProductFormula, Stage, lie_trotter, permuted_first_order, realize, suzuki
from .lattice import (
    LatticeHamiltonian,
    LatticeTerm,
    TermGrouping,
    group_even_odd,
    group_periodic,
    group_range,
    group_sum,
    heisenberg_random_field,
)
from .operators import commutator, embed_local, herm_expm, spectral_norm

__version__ = "0.1.0"
