"""Kernel SHAP and Latent SHAP explainers with a synthetic fidelity benchmark."""

from .baselines import naive_transform_explanation
from .core import (
    Distance,
    Explanation,
    KernelScheme,
    ProximityConfig,
    Space,
    cosine_similarity,
    enumerate_coalitions,
    mask_with_coalition,
    proximity,
    shapley_kernel_weight,
)
from .errors import *  # noqa: F401,F403
from .kernel_shap import (
    KernelShapConfig,
    brute_force_shapley,
    explain_kernel_shap,
    explain_with_inverse_transform,
    solve_constrained_wls,
)
from .latent import (
    LatentBackground,
    LatentShapConfig,
    Weighting,
    approximate_predictions,
    build_latent_background,
    explain_latent_shap,
    proximity_matrix,
)
from .transforms import FunctionTransform, IdentityTransform, Transform

__version__ = "0.1.0"
