"""Kernel SHAP, its inverse-transform variant, and an exact enumeration oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    MODEL_BATCH_ROWS,
    BlackBoxModel,
    Explanation,
    KernelScheme,
    Space,
    all_masks,
    as_matrix,
    as_vector,
    coalition_weights,
    default_names,
    enumerate_coalitions,
    predict,
    stack_coalitions,
)
from .errors import CapabilityError, ConditioningError, DimensionError, SizeCapError, ValidationError
from .transforms import Transform, apply_forward, apply_inverse, interpretable_names

BRUTE_FORCE_MAX_FEATURES = 15
RIDGE = 1e-10


@dataclass(frozen=True)
class KernelShapConfig:
    kernel_scheme: KernelScheme = KernelScheme.STANDARD
    coalition_budget: Optional[int] = None
    seed: int = 0
    ridge: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kernel_scheme", KernelScheme(self.kernel_scheme))
        if self.coalition_budget is not None and self.coalition_budget < 1:
            raise ValidationError("coalition_budget must be positive")

    def to_dict(self) -> dict:
        return {
            "kernel_scheme": self.kernel_scheme.value,
            "coalition_budget": self.coalition_budget,
            "seed": self.seed,
            "ridge": self.ridge,
        }


def solve_constrained_wls(designs, labels, weights, total: float, ridge: float = 0.0) -> np.ndarray:
    """Weighted least squares with the coefficients constrained to sum to ``total``.

    Minimises ``sum_j w_j (labels_j - designs_j @ phi)**2`` subject to
    ``phi.sum() == total`` by substituting the last coefficient and solving the
    reduced normal equations.
    """
    Z = np.asarray(designs, dtype=float)
    y = np.asarray(labels, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if Z.ndim != 2 or Z.shape[0] != y.size or y.size != w.size:
        raise DimensionError(f"designs {Z.shape}, labels {y.size}, weights {w.size}")
    if np.any(w <= 0):
        raise ValidationError("regression weights must be positive")
    if not np.all(np.isfinite(y)):
        raise ValidationError("labels contain NaN or Inf")
    n = Z.shape[1]
    if n == 1:
        return np.array([float(total)])
    Zr = Z[:, :-1] - Z[:, -1:]
    yr = y - Z[:, -1] * total
    A = Zr.T @ (w[:, None] * Zr)
    b = Zr.T @ (w * yr)
    if ridge:
        A = A + ridge * np.eye(n - 1)
    rank = np.linalg.matrix_rank(A)
    if rank < n - 1:
        raise ConditioningError(
            f"reduced normal matrix has rank {rank} < {n - 1}; the coalitions do not identify every feature"
        )
    phi = np.linalg.solve(A, b)
    return np.append(phi, total - phi.sum())


def coalition_means(model: BlackBoxModel, background: np.ndarray, instance: np.ndarray,
                    masks: np.ndarray, inverse: Optional[Transform] = None) -> np.ndarray:
    """Mean model output over each coalition-specific background dataset.

    Coalition datasets are packed into model calls of at most 10,000 rows. With
    ``inverse`` the masked rows live in interpretable space and are mapped back
    through ``inverse.inverse`` before the model sees them.
    """
    nb = background.shape[0]
    per_call = max(1, MODEL_BATCH_ROWS // nb)
    out = np.empty(masks.shape[0])
    for start in range(0, masks.shape[0], per_call):
        chunk = masks[start:start + per_call]
        rows = stack_coalitions(background, instance, chunk)
        if inverse is not None:
            rows = apply_inverse(inverse, rows)
        out[start:start + chunk.shape[0]] = predict(model, rows).reshape(chunk.shape[0], nb).mean(1)
    return out


def _fit(masks, labels, base, fx, cfg: KernelShapConfig) -> np.ndarray:
    weights = coalition_weights(masks, cfg.kernel_scheme) if masks.shape[0] else np.empty(0)
    return solve_constrained_wls(masks, labels - base, weights, fx - base,
                                 ridge=RIDGE if cfg.ridge else 0.0)


def explain_kernel_shap(model: BlackBoxModel, background, instance,
                        cfg: Optional[KernelShapConfig] = None,
                        feature_names: Optional[list[str]] = None) -> Explanation:
    """Kernel SHAP attributions of ``model(instance)`` against ``background``.

    With exhaustive coalitions and the standard kernel the attributions are the
    exact Shapley values of ``v(c) = mean f(B with c taken from x)``.
    """
    cfg = cfg or KernelShapConfig()
    B = as_matrix(background, "background")
    x = as_vector(instance)
    if x.size != B.shape[1]:
        raise DimensionError(f"instance has {x.size} features, background {B.shape[1]}")
    n = x.size
    masks = enumerate_coalitions(n, cfg.coalition_budget, cfg.seed, cfg.kernel_scheme)
    base = float(predict(model, B).mean())
    fx = float(predict(model, x[None, :])[0])
    labels = coalition_means(model, B, x, masks)
    phi = _fit(masks, labels, base, fx, cfg)
    return Explanation(base, phi, feature_names or default_names(n), Space.INPUT,
                       meta={"n_coalitions": int(masks.shape[0])})


def explain_with_inverse_transform(model: BlackBoxModel, transform: Transform, background, instance,
                                   cfg: Optional[KernelShapConfig] = None,
                                   feature_names: Optional[list[str]] = None) -> Explanation:
    """Kernel SHAP over interpretable features using an exact inverse transform.

    Coalitions are formed on the transformed background and instance; every
    masked interpretable row is mapped back with the inverse before the model
    is evaluated. The base value and the explained output are taken on the
    original background and instance.
    """
    cfg = cfg or KernelShapConfig()
    B = as_matrix(background, "background")
    x = as_vector(instance)
    if x.size != B.shape[1]:
        raise DimensionError(f"instance has {x.size} features, background {B.shape[1]}")
    if not getattr(transform, "invertible", False):
        raise CapabilityError("explain_with_inverse_transform needs a transform with an inverse")
    Bp = apply_forward(transform, B)
    xp = apply_forward(transform, x[None, :])[0]
    n = xp.size
    masks = enumerate_coalitions(n, cfg.coalition_budget, cfg.seed, cfg.kernel_scheme)
    base = float(predict(model, B).mean())
    fx = float(predict(model, x[None, :])[0])
    labels = coalition_means(model, Bp, xp, masks, inverse=transform)
    phi = _fit(masks, labels, base, fx, cfg)
    names = feature_names or interpretable_names(transform, n)
    return Explanation(base, phi, names, Space.INTERPRETABLE,
                       meta={"n_coalitions": int(masks.shape[0])})


def brute_force_shapley(model: BlackBoxModel, background, instance,
                        feature_names: Optional[list[str]] = None) -> Explanation:
    """Exact Shapley values by enumerating every coalition (at most 15 features)."""
    B = as_matrix(background, "background")
    x = as_vector(instance)
    if x.size != B.shape[1]:
        raise DimensionError(f"instance has {x.size} features, background {B.shape[1]}")
    n = x.size
    if n > BRUTE_FORCE_MAX_FEATURES:
        raise SizeCapError(f"brute force is capped at {BRUTE_FORCE_MAX_FEATURES} features, got {n}")
    masks = all_masks(n)
    value = np.empty(masks.shape[0])
    for s, mask in enumerate(masks):
        rows = B.copy()
        rows[:, mask] = x[mask]
        value[s] = predict(model, rows).mean()
    ints = np.arange(1 << n)
    sizes = masks.sum(1)
    fact = [math.factorial(k) for k in range(n + 1)]
    weight = np.array([fact[k] * fact[n - k - 1] / fact[n] if k < n else 0.0 for k in range(n + 1)])
    phi = np.empty(n)
    for i in range(n):
        without = ints[(ints >> i) & 1 == 0]
        phi[i] = np.sum(weight[sizes[without]] * (value[without | (1 << i)] - value[without]))
    return Explanation(float(value[0]), phi, feature_names or default_names(n), Space.INPUT)
