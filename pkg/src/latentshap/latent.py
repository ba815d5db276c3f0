"""Latent SHAP: interpretable-space attributions from a forward-only transform.

Without an inverse, a masked interpretable sample cannot be pushed back to the
model. Instead every input-space coalition dataset is sent through both the
model and the transform, giving a latent background of (interpretable row,
model output) pairs. A masked interpretable sample is then labelled by a
proximity-weighted average of those outputs, and the coalition labels are fed
to the same constrained regression Kernel SHAP uses.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import _kernels
from .core import (
    MODEL_BATCH_ROWS,
    BlackBoxModel,
    Distance,
    Explanation,
    KernelScheme,
    ProximityConfig,
    Space,
    as_matrix,
    as_vector,
    all_masks,
    coalition_weights,
    enumerate_coalitions,
    masks_to_ints,
    median_bandwidth,
    pairwise_distances,
    predict,
    resolve_bandwidth,
    sample_pairs,
    stack_coalitions,
)
from .errors import DimensionError, UnderflowError, ValidationError
from .kernel_shap import solve_constrained_wls
from .transforms import Transform, apply_forward, interpretable_names

FAST_MAX_FEATURES = 16
_ROW_BLOCK = 4096
_MASK_BLOCK = 1024


class Weighting(str, enum.Enum):
    SOFTMAX = "softmax"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class LatentShapConfig:
    """Settings for :func:`explain_latent_shap`.

    ``global_bandwidth`` resolves one median-heuristic sigma against the
    transformed background instead of one per interpretable coalition.
    ``fast`` allows the compiled kernel when coalitions are exhaustive and
    the distance is L2; results agree with the numpy path to about 1e-9.
    """

    proximity: ProximityConfig = field(default_factory=ProximityConfig)
    weighting: Weighting = Weighting.SOFTMAX
    input_coalition_budget: Optional[int] = None
    interp_coalition_budget: Optional[int] = None
    kernel_scheme: KernelScheme = KernelScheme.STANDARD
    seed: int = 0
    global_bandwidth: bool = False
    fast: bool = True

    def __post_init__(self):
        object.__setattr__(self, "weighting", Weighting(self.weighting))
        object.__setattr__(self, "kernel_scheme", KernelScheme(self.kernel_scheme))
        for name in ("input_coalition_budget", "interp_coalition_budget"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValidationError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return {
            "distance": self.proximity.distance.value,
            "bandwidth": self.proximity.bandwidth,
            "weighting": self.weighting.value,
            "input_coalition_budget": self.input_coalition_budget,
            "interp_coalition_budget": self.interp_coalition_budget,
            "kernel_scheme": self.kernel_scheme.value,
            "seed": self.seed,
            "global_bandwidth": self.global_bandwidth,
            "fast": self.fast,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LatentShapConfig":
        d = dict(d)
        prox = ProximityConfig(d.pop("distance", Distance.L2), d.pop("bandwidth", None))
        return cls(proximity=prox, **d)


@dataclass
class LatentBackground:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float).ravel()
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.size:
            raise DimensionError(f"{self.features.shape} latent rows for {self.labels.size} labels")
        if not np.all(np.isfinite(self.labels)):
            raise ValidationError("latent labels contain NaN or Inf")

    def __len__(self) -> int:
        return self.labels.size


def build_latent_background(model: BlackBoxModel, transform: Transform, background, instance,
                            coalitions) -> LatentBackground:
    """Transformed coalition datasets and the model outputs on them.

    Rows are ordered by coalition, then by background row; duplicates are kept.
    """
    B = as_matrix(background, "background")
    x = as_vector(instance)
    masks = np.asarray(coalitions, dtype=bool)
    if masks.ndim != 2 or masks.shape[1] != B.shape[1] or x.size != B.shape[1]:
        raise DimensionError(f"background {B.shape}, instance {x.size}, coalitions {masks.shape}")
    per_call = max(1, MODEL_BATCH_ROWS // B.shape[0])
    feats, labels = [], []
    for start in range(0, masks.shape[0], per_call):
        rows = stack_coalitions(B, x, masks[start:start + per_call])
        feats.append(apply_forward(transform, rows))
        labels.append(predict(model, rows))
    return LatentBackground(np.concatenate(feats), np.concatenate(labels))


def proximity_matrix(latent: Union[LatentBackground, np.ndarray], coalition_data: np.ndarray,
                     cfg: ProximityConfig, seed: int = 0) -> np.ndarray:
    """``exp(-D**2 / sigma**2)`` between latent rows (rows) and coalition samples (columns)."""
    L = latent.features if isinstance(latent, LatentBackground) else as_matrix(latent, "latent")
    Bc = as_matrix(coalition_data, "coalition data")
    if L.shape[1] != Bc.shape[1]:
        raise DimensionError(f"latent rows have {L.shape[1]} features, coalition data {Bc.shape[1]}")
    sigma = resolve_bandwidth(L, Bc, cfg, seed)
    D = pairwise_distances(L, Bc, cfg.distance)
    return np.exp(-(D * D) / sigma ** 2)


def approximate_predictions(M: np.ndarray, labels, weighting: Weighting = Weighting.SOFTMAX) -> np.ndarray:
    """Proximity-weighted average of ``labels`` for every column of ``M``."""
    M = np.asarray(M, dtype=float)
    y = np.asarray(labels, dtype=float).ravel()
    if M.ndim != 2 or M.shape[0] != y.size:
        raise DimensionError(f"proximity matrix {M.shape} for {y.size} labels")
    W = np.exp(M) if Weighting(weighting) is Weighting.SOFTMAX else M
    den = W.sum(0)
    if np.any(den == 0):
        raise UnderflowError("every proximity of some coalition sample underflowed to zero; raise the bandwidth")
    return (W.T @ y) / den


def coalition_bandwidths(L: np.ndarray, Bp: np.ndarray, xp: np.ndarray, masks: np.ndarray,
                         cfg: LatentShapConfig) -> np.ndarray:
    """One sigma per interpretable coalition.

    The median heuristic reuses the same sampled (latent row, background row)
    pairs for every coalition, so coalitions differ only in the masked values.
    """
    prox = cfg.proximity
    if prox.bandwidth is not None:
        return np.full(masks.shape[0], prox.bandwidth)
    if cfg.global_bandwidth:
        return np.full(masks.shape[0], resolve_bandwidth(L, Bp, prox, cfg.seed))
    ia, ib = sample_pairs(L.shape[0], Bp.shape[0], np.random.default_rng(cfg.seed))
    La, Bb = L[ia], Bp[ib]
    out = np.empty(masks.shape[0])
    if prox.distance is Distance.COSINE:
        for r, mask in enumerate(masks):
            Bc = np.where(mask, xp, Bb)
            num = (La * Bc).sum(1)
            den = np.linalg.norm(La, axis=1) * np.linalg.norm(Bc, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                d = 1.0 - num / den
            out[r] = median_bandwidth(d[np.isfinite(d)]) if np.any(np.isfinite(d)) else 1.0
        return out
    to_x = (La - xp) ** 2
    to_b = (La - Bb) ** 2
    delta = (to_x - to_b).T
    base = to_b.sum(1)
    for start in range(0, masks.shape[0], _MASK_BLOCK):
        chunk = masks[start:start + _MASK_BLOCK].astype(float)
        d2 = base[None, :] + chunk @ delta
        d = np.sqrt(np.maximum(d2, 0.0))
        out[start:start + chunk.shape[0]] = [median_bandwidth(row) for row in d]
    return out


def _numpy_labels(L, Y, Bp, xp, masks, sigmas, cfg: LatentShapConfig) -> np.ndarray:
    ybar = Y.mean()
    Yc = Y - ybar
    softmax = cfg.weighting is Weighting.SOFTMAX
    out = np.empty(masks.shape[0])
    for r, mask in enumerate(masks):
        Bc = np.where(mask, xp, Bp)
        num = np.zeros(Bc.shape[0])
        den = np.zeros(Bc.shape[0])
        for o in range(0, L.shape[0], _ROW_BLOCK):
            D = pairwise_distances(L[o:o + _ROW_BLOCK], Bc, cfg.proximity.distance)
            W = np.exp(-(D * D) / sigmas[r] ** 2)
            if softmax:
                W = np.exp(W)
            num += Yc[o:o + _ROW_BLOCK] @ W
            den += W.sum(0)
        if np.any(den == 0):
            raise UnderflowError(
                f"all proximities underflowed for interpretable coalition {r}; raise the bandwidth"
            )
        out[r] = ybar + np.mean(num / den)
    return out


def _use_fast_path(cfg: LatentShapConfig, n: int) -> bool:
    return (cfg.fast and cfg.interp_coalition_budget is None and cfg.proximity.distance is Distance.L2
            and n <= FAST_MAX_FEATURES)


def coalition_labels(latent: LatentBackground, Bp: np.ndarray, xp: np.ndarray, masks: np.ndarray,
                     cfg: LatentShapConfig) -> tuple[np.ndarray, np.ndarray, str]:
    """Approximate label for each interpretable coalition, plus sigmas and the path taken."""
    L, Y = latent.features, latent.labels
    n = Bp.shape[1]
    if _use_fast_path(cfg, n):
        everything = all_masks(n)
        sigmas_all = coalition_bandwidths(L, Bp, xp, everything, cfg)
        labels_all, underflow = _kernels.exhaustive_labels(
            L, Y, Bp, xp, 1.0 / sigmas_all ** 2, cfg.weighting is Weighting.SOFTMAX
        )
        if underflow:
            raise UnderflowError("all proximities underflowed for some interpretable coalition; raise the bandwidth")
        idx = np.array(masks_to_ints(masks), dtype=np.int64)
        return labels_all[idx], sigmas_all[idx], "compiled"
    sigmas = coalition_bandwidths(L, Bp, xp, masks, cfg)
    return _numpy_labels(L, Y, Bp, xp, masks, sigmas, cfg), sigmas, "numpy"


def _with_ends(masks: np.ndarray, n: int) -> np.ndarray:
    empty = np.zeros((1, n), dtype=bool)
    full = np.ones((1, n), dtype=bool)
    return np.concatenate([empty, masks, full])


def explain_latent_shap(model: BlackBoxModel, transform: Transform, background, instance,
                        cfg: Optional[LatentShapConfig] = None,
                        feature_names: Optional[list[str]] = None) -> Explanation:
    """Attributions over the transform's output features, using only ``transform.forward``.

    The base value is the approximate label of the empty interpretable
    coalition and the attributions sum to the full-coalition label minus it.
    """
    cfg = cfg or LatentShapConfig()
    B = as_matrix(background, "background")
    x = as_vector(instance)
    if x.size != B.shape[1]:
        raise DimensionError(f"instance has {x.size} features, background {B.shape[1]}")

    input_masks = _with_ends(
        enumerate_coalitions(x.size, cfg.input_coalition_budget, cfg.seed, cfg.kernel_scheme), x.size
    )
    latent = build_latent_background(model, transform, B, x, input_masks)

    Bp = apply_forward(transform, B)
    xp = apply_forward(transform, x[None, :])[0]
    if latent.features.shape[1] != xp.size:
        raise DimensionError("transform output width changed between calls")
    n = xp.size
    proper = enumerate_coalitions(n, cfg.interp_coalition_budget, cfg.seed, cfg.kernel_scheme)
    masks = _with_ends(proper, n)

    labels, sigmas, path = coalition_labels(latent, Bp, xp, masks, cfg)
    base, full = float(labels[0]), float(labels[-1])
    weights = coalition_weights(proper, cfg.kernel_scheme) if proper.shape[0] else np.empty(0)
    phi = solve_constrained_wls(proper, labels[1:-1] - base, weights, full - base)
    names = feature_names or interpretable_names(transform, n)
    meta = {
        "full_label": full,
        "n_latent_rows": len(latent),
        "n_interp_coalitions": int(proper.shape[0]),
        "sigma_median": float(np.median(sigmas)),
        "path": path,
    }
    return Explanation(base, phi, names, Space.INTERPRETABLE, meta=meta)
