"""Off-the-grid total-variation reconstruction with polygonal atoms.

The solver represents an image as a sparse sum of amplitudes times indicator
functions of simple polygons and fits it to linear measurements by a
fully-corrective conditional-gradient loop; new polygons come from a weighted
isoperimetric (Cheeger-type) oracle run as a mesh relaxation followed by
polygonal shape-gradient ascent.
"""

from .cheeger import (
    RefineConfig,
    cheeger_objective,
    exterior_angles,
    optimality_residual,
    perimeter_gradient,
    refine,
    shape_gradient,
    weighted_area_gradient,
)
from .geometry import (
    SimplePolygon,
    boundary_distance,
    diameter,
    edge_hat_integrals,
    is_simple,
    perimeter,
    regular_ngon,
    resample_polygon,
    shoelace_area,
    weighted_area,
    winding_number,
)
from .grid import (
    GridConfig,
    GridFunction,
    PrimalDualConfig,
    auto_half_width,
    discrete_gradient,
    discrete_tv,
    discrete_tv_anisotropic,
    discretize_field,
    extract_polygon,
    fixed_grid_objective,
    gradient_adjoint,
    project_l21_ball,
    solve_fixed_grid_tv,
    solve_relaxed_cheeger,
)
from .operator import (
    GaussianOperator,
    Measurements,
    dual_field,
    edge_measurement_weights,
    forward,
    grid_centers,
    lambda_from_noise,
    unit_forward,
)
from .quadrature import DEFAULT_QUAD, QuadratureSpec
from .radial import (
    G,
    G_n,
    R_star,
    R_star_n,
    RadialProfile,
    amplitude_closed_form,
    gaussian_profile,
    radial_table,
)
from .sparse import (
    Atom,
    AtomicFunction,
    FWConfig,
    FWRecord,
    FWTrace,
    frank_wolfe,
    objective,
    sliding_step,
    solve_amplitudes,
)

__version__ = "0.1.0"
