"""Ridge regression with smoothly varying per-coefficient penalties on RBF bases."""

from .basis import (
    Adjacency,
    BasisSpec,
    DesignMatrix,
    RBFFeatures,
    build_grid_centers,
    design_matrix,
    make_basis,
    rbf_width,
)
from .core import (
    CompatibilityError,
    DataError,
    Dataset,
    DegenerateVarianceError,
    FitError,
    FitResult,
    GicReport,
    LambdaState,
    ModelParams,
    SingularSystemError,
    SvridgeError,
    load_dataset,
    validate_compatibility,
)
from .estimators import GICRidge, SmoothlyVaryingRidge
from .gic import (
    approx_gic,
    approximation_gap,
    assemble_stu,
    gamma_select,
    lambda_tilde,
    lambda_tilde_derivatives,
)
from .ridge import RidgeConfig, ridge_edf, ridge_fit, ridge_gic, ridge_select
from .simlab import SimConfig, SimReport, generate, mse, run_benchmark, true_function
from .svreg import SvrOptions, lambda_step_single, svr_fit, svr_objective, weighted_ridge_step

__version__ = "0.1.0"
