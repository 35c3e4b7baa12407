"""LiDAR-guided stereo matching.

Sparse, trusted disparities (projected LiDAR returns) reshape the cost volume
of a classical dense matcher before its optimisation step. Two matchers are
provided, census SGM and AD-Census, with Gaussian or riverbed modulation.
"""
from .adcensus import AdCensusParams, run_adcensus
from .errors import (
    EmptyReportError,
    FormatError,
    InvalidInputError,
    InvalidParameterError,
    LidarStereoError,
)
from .evaluation import EvalReport, evaluate
from .grids import INVALID, CostVolume, median_filter_3x3, subpixel_refine, winner_take_all
from .guidance import (
    GuidanceField,
    GuidanceParams,
    SparseDisparitySet,
    SparsePoint,
    auto_window_size,
    build_guidance_field,
    gauss_modulate,
    lidar_density,
    riverbed_modulate,
)
from .sampler import SampleSpec, sample_sparse
from .sgm import Guidance, SgmParams, run_sgm

__version__ = "0.1.0"
