"""Dynamic optimal transport on staggered grids via a second-order cone splitting."""

from .cone import build_weighted_embed_scale, project_cone_field, project_soc_point
from .grid import (
    GridSpec,
    ShapeError,
    avg_space_timeadj,
    avg_time_spaceadj,
    decouple,
    embed,
    embed_adjoint,
    gradient,
    gradient_adjoint,
    gram_diagonal,
)
from .poisson import laplacian_apply, solve_neumann
from .problems import (
    DensitySpec,
    Problem,
    build_cost_vector,
    build_weights,
    make_example,
    rasterize_density,
)
from .residuals import ResidualReport, discrete_l2, kkt_dot, kkt_soc
from .solvers import (
    Solution,
    SolverConfig,
    SolverState,
    extract_density,
    run,
    step_accadmm,
    step_inpalm,
    step_palm,
    update_sigma,
)

__version__ = "0.1.0"
