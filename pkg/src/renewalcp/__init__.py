"""Renewal contact process toolkit.

Simulation, renewal-measure estimation, and oriented-percolation
comparison machinery for contact processes whose recovery clocks renew
with a general interarrival law.
"""

__version__ = "0.1.0"

from .constants import CLOSURE_THRESHOLD, HALF_CLOSURE_THRESHOLD
from .contact import (
    GraphicalSample,
    Trajectory,
    build_graphical_sample,
    estimate_lambda_c,
    evolve,
    has_infection_path,
    survival_probability,
    thin_arrows,
)
from .contours import (
    AdmissiblePath,
    count_bound_check,
    count_contours,
    counting_bound,
    enumerate_contours,
    is_admissible,
    peierls_closed_form,
    peierls_series,
    quadrant_to_dual,
    threshold_check,
)
from .distributions import (
    InterarrivalSpec,
    arithmetic,
    cantor_geometric,
    dirac,
    exponential,
    mixture,
    sample_batch,
    sample_renewal_marks,
    spec_from_json,
    spec_to_json,
    uniform_interval,
)
from .errors import (
    BracketError,
    ResourceLimitError,
    SeriesDivergenceError,
    UndecidableAtHeightError,
    ValidationError,
)
from .percolation import (
    IidBondModel,
    InducedArithmeticModel,
    InducedWindowModel,
    RegenerativeColumnModel,
    WedgeBondConfig,
    WedgeGraph,
    audit_block_coupling,
    build_wedge,
    check_property_I,
    check_property_II,
    explore_cluster,
    find_dual_contour,
    percolation_probability,
    validate_contour,
)
from .renewal import (
    arithmetic_renewal_masses,
    atomic_renewal_measure,
    check_bounded_criterion,
    choose_block_exponent,
    mc_interval_mass,
    renewal_mass_limit,
    sup_arithmetic_mass,
    sup_window_mass,
)
from .streams import derive_stream

__all__ = [
    "CLOSURE_THRESHOLD",
    "HALF_CLOSURE_THRESHOLD",
    "GraphicalSample",
    "Trajectory",
    "build_graphical_sample",
    "estimate_lambda_c",
    "evolve",
    "has_infection_path",
    "survival_probability",
    "thin_arrows",
    "AdmissiblePath",
    "count_bound_check",
    "count_contours",
    "counting_bound",
    "enumerate_contours",
    "is_admissible",
    "peierls_closed_form",
    "peierls_series",
    "quadrant_to_dual",
    "threshold_check",
    "InterarrivalSpec",
    "arithmetic",
    "cantor_geometric",
    "dirac",
    "exponential",
    "mixture",
    "sample_batch",
    "sample_renewal_marks",
    "spec_from_json",
    "spec_to_json",
    "uniform_interval",
    "BracketError",
    "ResourceLimitError",
    "SeriesDivergenceError",
    "UndecidableAtHeightError",
    "ValidationError",
    "IidBondModel",
    "InducedArithmeticModel",
    "InducedWindowModel",
    "RegenerativeColumnModel",
    "WedgeBondConfig",
    "WedgeGraph",
    "audit_block_coupling",
    "build_wedge",
    "check_property_I",
    "check_property_II",
    "explore_cluster",
    "find_dual_contour",
    "percolation_probability",
    "validate_contour",
    "arithmetic_renewal_masses",
    "atomic_renewal_measure",
    "check_bounded_criterion",
    "choose_block_exponent",
    "mc_interval_mass",
    "renewal_mass_limit",
    "sup_arithmetic_mass",
    "sup_window_mass",
    "derive_stream",
]
