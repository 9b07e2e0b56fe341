"""Numerical laboratory for weighted transfer operators of piecewise
expanding interval maps: variation-norm estimators, assumption checks, and
certified spectral-radius bounds compared against Ulam spectra."""

from .measures import (
    GridDensity,
    GridFunction,
    Mollifier,
    bv_norm,
    lp_norm,
    mollify,
    resample,
    tv_norm,
)
from .gbv import (
    ApproxFamily,
    GbvEstimate,
    LayerDecomposition,
    clamp_family,
    gbv_upper,
    layer_decompose,
    pair,
)
from .maps import (
    BranchedMap,
    CocycleBounds,
    HypothesisReport,
    WeightSpec,
    affine_map,
    cascade_map,
    check_hypotheses,
    cocycle,
    doubling_map,
    evaluate,
    lambda_estimates,
    make_weight,
)
from .transfer import (
    QuadratureSettings,
    TransferSystem,
    UlamMatrix,
    apply_smoothed,
    apply_transfer,
    interpolation_diagnostic,
    mollify_sweep,
    operator_norm_probe,
    smoothed_growth_fit,
    ulam_matrix,
)
from .spectral import (
    LyDiagnostic,
    SolverSettings,
    SpectralReport,
    leading_spectrum,
    lambda_n_sequence,
    ly_diagnostic,
    make_report,
    radius_bounds,
)

__version__ = "0.1.0"
