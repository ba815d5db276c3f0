"""Naive comparison method: input-space Kernel SHAP pushed through the transform."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .core import BlackBoxModel, Explanation, Space
from .kernel_shap import KernelShapConfig, explain_kernel_shap
from .transforms import Transform, apply_forward, interpretable_names


def transform_attributions(transform: Transform, explanation: Explanation, linear_only: bool = False,
                           feature_names: Optional[list[str]] = None) -> Explanation:
    """Treat an attribution vector as a sample and transform it.

    By default the whole map is applied, offset included. ``linear_only``
    subtracts the image of the zero vector, which removes the offset of an
    affine transform.
    """
    phi = explanation.attributions
    mapped = apply_forward(transform, phi[None, :])[0]
    if linear_only:
        mapped = mapped - apply_forward(transform, np.zeros((1, phi.size)))[0]
    names = feature_names or interpretable_names(transform, mapped.size)
    return Explanation(explanation.base_value, mapped, names, Space.INTERPRETABLE,
                       meta=dict(explanation.meta))


def naive_transform_explanation(model: BlackBoxModel, transform: Transform, background, instance,
                                cfg: Optional[KernelShapConfig] = None, linear_only: bool = False,
                                feature_names: Optional[list[str]] = None) -> Explanation:
    """Input-space Kernel SHAP followed by :func:`transform_attributions`."""
    ks = explain_kernel_shap(model, background, instance, cfg)
    return transform_attributions(transform, ks, linear_only, feature_names)
