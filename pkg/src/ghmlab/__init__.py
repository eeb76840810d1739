"""Numerical laboratory for generalized horseshoe maps.

Build and validate piecewise-hyperbolic maps of the unit square, approximate
their physical measures by Ulam discretization and direct simulation, and
compute the virtual-expansion certificate governing absolute continuity.
"""

from . import errors, kernels
from .maps import (
    AffineBranch,
    ConeReport,
    GhmMap,
    SmoothBranch,
    build_affine_family,
    differential,
    estimate_distortion,
    load_map_spec,
    max_feasible_angle_scale,
    preimages,
    save_map_spec,
    single_branch_map,
    smooth_perturbation,
    validate_hyperbolicity,
)
from .geometry import StripRegion
from .symbolic import (
    ChartApprox,
    Word,
    attractor_cells,
    itinerary,
    manifold_approx,
    refine_strip,
    straightening_chart,
)
from .transfer import (
    GridDensity,
    SpectralReport,
    UlamMatrix,
    apply_transfer,
    sobolev_seminorm,
    spectral_gap,
    stationary_density,
    ulam_matrix,
)
from .vexp import (
    CoveragePiece,
    ExpansionReport,
    b_mu_field,
    beta_mu_estimate,
    coverage_partition,
    eta,
)
from .stats import (
    CloudResult,
    CltReport,
    CorrelationSeries,
    Observable,
    birkhoff_average,
    clt_diagnostic,
    coord_x,
    coord_y,
    correlation_series,
    cos2pix,
    grid_sampled,
    indicator,
    push_cloud,
)

__version__ = "0.1.0"
