"""Bilinear kernel-EDMD surrogates of control-affine systems with deterministic residual bounds."""

from ._backend import BACKEND
from .bounds import (
    BoundConstants,
    ProportionalBound,
    ValidationReport,
    calibrate_C1,
    compute_C3,
    compute_constants,
    constants_for,
    eval_bound,
    proportional,
    validate_empirically,
)
from .dataset import CenterSet, Dataset, TripletSet, build_centers, collect, excite_inputs, fill_distance, generate
from .dataset import load as load_dataset
from .dataset import save as save_dataset
from .domain import Box
from .errors import (
    ConfigError,
    DatasetFormatError,
    DuplicateCentersError,
    ExcitationError,
    KBilinearError,
    NumericallyIndefiniteError,
    TrajectoryDivergedError,
    UnsupportedSmoothnessError,
)
from .kernel import (
    KernelMatrix,
    KernelSpec,
    cross_kernel,
    estimate_D_phi,
    eval_kernel,
    eval_theta,
    feature_gradient,
    feature_hessian,
    features,
    kernel_matrix,
    lifted_state,
    rkhs_feature_norms,
)
from .regress import LocalEstimate, fit_all, fit_local, perturbation_gap
from .surrogate import (
    BaselineSurrogate,
    BilinearSurrogate,
    build_baseline,
    build_kedmd,
    build_kedmd_from_images,
    load_model,
    predict_step,
    residual,
    rollout,
    save_model,
)
from .system import (
    ControlAffineSystem,
    SamplingConfig,
    SystemConstants,
    estimate_constants,
    euler_maps,
    flow,
    get_system,
    register_system,
    zone_temp_benchmark,
)

__version__ = "0.1.0"
