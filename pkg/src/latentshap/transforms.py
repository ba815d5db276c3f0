"""Maps from model-input space to an interpretable feature space."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .errors import CapabilityError, DimensionError, ValidationError


class Transform:
    """Row-wise map from input space to interpretable space.

    Subclasses implement :meth:`forward`; those that can map back also
    implement :meth:`inverse` and set ``invertible = True``.
    """

    invertible = False
    feature_names: Optional[list[str]] = None

    def forward(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} has no inverse")

    def __call__(self, X):
        return self.forward(X)


class IdentityTransform(Transform):
    invertible = True

    def forward(self, X):
        return np.array(X, dtype=float)

    def inverse(self, Z):
        return np.array(Z, dtype=float)


class FunctionTransform(Transform):
    """Wrap plain callables as a transform."""

    def __init__(
        self,
        forward: Callable[[np.ndarray], np.ndarray],
        inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        feature_names: Optional[list[str]] = None,
    ):
        self._forward = forward
        self._inverse = inverse
        self.invertible = inverse is not None
        self.feature_names = feature_names

    def forward(self, X):
        return np.asarray(self._forward(X), dtype=float)

    def inverse(self, Z):
        if self._inverse is None:
            raise CapabilityError("transform was built without an inverse")
        return np.asarray(self._inverse(Z), dtype=float)


def apply_forward(t: Transform, X: np.ndarray) -> np.ndarray:
    """``t.forward(X)`` with the row-count and finiteness checks every caller needs."""
    Z = np.asarray(t.forward(X), dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.ndim != 2 or Z.shape[0] != X.shape[0]:
        raise DimensionError(f"transform mapped {X.shape[0]} rows to shape {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise ValidationError("transform output contains NaN or Inf")
    return Z


def apply_inverse(t: Transform, Z: np.ndarray) -> np.ndarray:
    if not getattr(t, "invertible", False):
        raise CapabilityError(f"{type(t).__name__} has no inverse")
    X = np.asarray(t.inverse(Z), dtype=float)
    if X.ndim != 2 or X.shape[0] != Z.shape[0]:
        raise DimensionError(f"inverse mapped {Z.shape[0]} rows to shape {X.shape}")
    return X


def interpretable_names(t: Transform, n: int) -> list[str]:
    names = getattr(t, "feature_names", None)
    if names is not None and len(names) == n:
        return list(names)
    return [f"z{i + 1}" for i in range(n)]
