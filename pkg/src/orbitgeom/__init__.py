"""Geometry of unitary orbits of isospectral density operators.

Purification bundle, mechanical connection, horizontal lifts, the operational
geometric phase and the dynamic distance with a Bures comparator.
"""

from .core import (
    DEFAULT_TOL,
    BundlePoint,
    DensityOperator,
    Spectrum,
    Tolerances,
    check_gauge_element,
    expm_antihermitian,
    project_to_fiber_tangent,
    spectrum_of,
    standard_purification,
    validate_density,
)
from .distance import (
    DispersionReport,
    DistanceConfig,
    DistanceResult,
    bures_distance,
    curve_length_in_base,
    dispersion_length,
    dynamic_distance,
)
from .dynamics import (
    HamiltonianPath,
    LiftedTrajectory,
    holonomy,
    holonomy_trace,
    horizontal_lift,
    horizontalize,
    lift_unitary_curve,
    operational_geometric_phase,
    propagate_von_neumann,
    refinement_probe,
    time_grid,
)
from .geometry import (
    CovectorOnGauge,
    GeometryContext,
    connection_form,
    horizontal_projection,
    infinitesimal_generator,
    metric_G,
    moment_map,
    moment_of_inertia,
    symplectic_Omega,
    vertical_projection,
)

__version__ = "0.1.0"
