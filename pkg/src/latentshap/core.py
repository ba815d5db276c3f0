"""Shared types, proximity kernels and coalition machinery.

Data matrices are plain 2-D float64 numpy arrays (rows are samples) and
instances are 1-D arrays. Coalitions are stored as boolean masks, one row per
coalition, with column ``i`` set when feature ``i`` is fixed to the explained
instance.
"""

from __future__ import annotations

import enum
import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    DimensionError,
    ExcludedCoalitionError,
    ModelError,
    UndefinedSimilarityError,
    ValidationError,
)

#: A black-box model maps an ``(n_samples, n_features)`` array to ``n_samples`` outputs.
BlackBoxModel = Callable[[np.ndarray], np.ndarray]

MODEL_BATCH_ROWS = 10_000
BANDWIDTH_PAIRS = 2_000


class Space(str, enum.Enum):
    INPUT = "input"
    INTERPRETABLE = "interpretable"


class Distance(str, enum.Enum):
    L2 = "l2"
    COSINE = "cosine"


class KernelScheme(str, enum.Enum):
    """Coalition weighting used in the explanation regression.

    ``STANDARD`` is the Shapley regression kernel ``(n-1) / (C(n,k) k (n-k))``
    and recovers exact Shapley values. ``MARGINAL`` is the marginal-contribution
    weight ``k! (n-k-1)! / n!``.
    """

    STANDARD = "standard"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class ProximityConfig:
    """Distance and Gaussian bandwidth for ``exp(-D(a, b)**2 / sigma**2)``.

    ``bandwidth=None`` selects the median heuristic: sigma is the median
    distance over (at most 2,000) sampled pairs of the two point sets being
    compared.
    """

    distance: Distance = Distance.L2
    bandwidth: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "distance", Distance(self.distance))
        if self.bandwidth is not None:
            bw = float(self.bandwidth)
            if not (np.isfinite(bw) and bw > 0):
                raise ValidationError(f"bandwidth must be positive and finite, got {self.bandwidth!r}")
            object.__setattr__(self, "bandwidth", bw)


@dataclass
class Explanation:
    """Base value plus one attribution per explained feature."""

    base_value: float
    attributions: np.ndarray
    feature_names: list[str]
    space: Space = Space.INPUT
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.attributions = np.asarray(self.attributions, dtype=float)
        self.space = Space(self.space)
        if self.attributions.ndim != 1:
            raise ValidationError("attributions must be a vector")
        if len(self.feature_names) != self.attributions.size:
            raise DimensionError(
                f"{self.attributions.size} attributions but {len(self.feature_names)} feature names"
            )
        if not (np.isfinite(self.base_value) and np.all(np.isfinite(self.attributions))):
            raise ValidationError("explanation contains non-finite values")

    @property
    def prediction(self) -> float:
        return float(self.base_value + self.attributions.sum())

    def to_dict(self, config_hash: str = "") -> dict:
        return {
            "base_value": float(self.base_value),
            "attributions": [
                {"name": name, "value": float(v)}
                for name, v in zip(self.feature_names, self.attributions)
            ],
            "space": self.space.value,
            "config_hash": config_hash,
        }

    def to_json(self, config_hash: str = "") -> str:
        return json.dumps(self.to_dict(config_hash), indent=2)


# ---------------------------------------------------------------------------
# validation helpers


def as_matrix(X, name: str = "data") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValidationError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(X)):
        raise ValidationError(f"{name} contains NaN or Inf")
    return X


def as_vector(x, name: str = "instance") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 2 and x.shape[0] == 1:
        x = x[0]
    if x.ndim != 1 or x.size == 0:
        raise ValidationError(f"{name} must be a non-empty vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} contains NaN or Inf")
    return x


def default_names(n: int, prefix: str = "x") -> list[str]:
    return [f"{prefix}{i + 1}" for i in range(n)]


def predict(model: BlackBoxModel, X: np.ndarray, batch_rows: int = MODEL_BATCH_ROWS) -> np.ndarray:
    """Evaluate ``model`` on ``X`` in chunks of at most ``batch_rows`` rows."""
    X = np.asarray(X, dtype=float)
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], batch_rows):
        chunk = X[start:start + batch_rows]
        y = np.asarray(model(chunk), dtype=float).reshape(-1)
        if y.size != chunk.shape[0]:
            raise ModelError(f"model returned {y.size} outputs for {chunk.shape[0]} rows")
        out[start:start + chunk.shape[0]] = y
    if not np.all(np.isfinite(out)):
        raise ModelError("model output contains NaN or Inf")
    return out


def config_hash(obj) -> str:
    """Short stable digest of a JSON-serialisable configuration."""
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# distances and proximity


def distance(a, b, kind: Distance = Distance.L2) -> float:
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.size != b.size:
        raise DimensionError(f"vectors of length {a.size} and {b.size}")
    if Distance(kind) is Distance.COSINE:
        return 1.0 - cosine_similarity(a, b)
    return float(np.linalg.norm(a - b))


def pairwise_distances(A: np.ndarray, B: np.ndarray, kind: Distance = Distance.L2) -> np.ndarray:
    """Distance matrix between the rows of ``A`` and the rows of ``B``."""
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"{A.shape[1]} vs {B.shape[1]} features")
    if Distance(kind) is Distance.COSINE:
        if not (np.all(np.any(A != 0, axis=1)) and np.all(np.any(B != 0, axis=1))):
            raise UndefinedSimilarityError("cosine distance undefined for zero vectors")
        return cdist(A, B, "cosine")
    return cdist(A, B, "euclidean")


def proximity(a, b, cfg: ProximityConfig) -> float:
    """Gaussian proximity ``exp(-D(a, b)**2 / sigma**2)`` for an explicit bandwidth."""
    if cfg.bandwidth is None:
        raise ValidationError("proximity of a single pair needs an explicit bandwidth")
    d = distance(a, b, cfg.distance)
    return float(np.exp(-(d * d) / (cfg.bandwidth ** 2)))


def median_bandwidth(distances: np.ndarray) -> float:
    """Median of sampled distances, falling back to a positive value when degenerate."""
    distances = np.asarray(distances, dtype=float).ravel()
    sigma = float(np.median(distances))
    if sigma > 0:
        return sigma
    positive = distances[distances > 0]
    # all points coincide: every proximity is 1 whatever sigma is
    return float(positive.mean()) if positive.size else 1.0


def sample_pairs(n_a: int, n_b: int, rng: np.random.Generator, cap: int = BANDWIDTH_PAIRS):
    """Index pairs for the median heuristic; all pairs when there are few enough."""
    if n_a * n_b <= cap:
        ia, ib = np.meshgrid(np.arange(n_a), np.arange(n_b), indexing="ij")
        return ia.ravel(), ib.ravel()
    return rng.integers(0, n_a, cap), rng.integers(0, n_b, cap)


def resolve_bandwidth(A: np.ndarray, B: np.ndarray, cfg: ProximityConfig, seed=0) -> float:
    if cfg.bandwidth is not None:
        return cfg.bandwidth
    ia, ib = sample_pairs(A.shape[0], B.shape[0], np.random.default_rng(seed))
    if Distance(cfg.distance) is Distance.COSINE:
        d = np.array([distance(A[i], B[j], cfg.distance) for i, j in zip(ia, ib)])
    else:
        d = np.linalg.norm(A[ia] - B[ib], axis=1)
    return median_bandwidth(d)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise DimensionError(f"vectors of length {a.size} and {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise UndefinedSimilarityError("cosine similarity is undefined for a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


# ---------------------------------------------------------------------------
# coalitions


def shapley_kernel_weight(n: int, k: int, scheme: KernelScheme = KernelScheme.STANDARD) -> float:
    if not 1 <= k <= n - 1:
        raise ExcludedCoalitionError(
            f"coalition size {k} of {n}: empty and full coalitions carry no finite weight"
        )
    if KernelScheme(scheme) is KernelScheme.MARGINAL:
        return math.factorial(k) * math.factorial(n - k - 1) / math.factorial(n)
    return (n - 1) / (math.comb(n, k) * k * (n - k))


def masks_to_ints(masks: np.ndarray) -> list[int]:
    return [sum(1 << i for i in np.flatnonzero(row)) for row in np.asarray(masks, dtype=bool)]


def ints_to_masks(values: Sequence[int], n: int) -> np.ndarray:
    out = np.zeros((len(values), n), dtype=bool)
    for r, v in enumerate(values):
        for i in range(n):
            out[r, i] = (v >> i) & 1
    return out


def _ordered(values, n: int) -> np.ndarray:
    values = sorted(values, key=lambda v: (bin(v).count("1"), v))
    return ints_to_masks(values, n)


def all_masks(n: int) -> np.ndarray:
    """Every subset of ``n`` features (``2**n`` rows), in integer order."""
    if n > 24:
        raise ValidationError(f"refusing to materialise 2**{n} coalitions")
    ints = np.arange(1 << n, dtype=np.int64)
    return ((ints[:, None] >> np.arange(n)) & 1).astype(bool)


def _size_allocation(n: int, remaining: int, scheme: KernelScheme) -> dict[int, int]:
    """Split ``remaining`` samples across sizes 2..n-2 proportional to kernel mass."""
    sizes = list(range(2, n - 1))
    mass = {k: math.comb(n, k) * shapley_kernel_weight(n, k, scheme) for k in sizes}
    alloc: dict[int, int] = {}
    open_sizes = list(sizes)
    while open_sizes and remaining > 0:
        total = sum(mass[k] for k in open_sizes)
        full = [k for k in open_sizes if remaining * mass[k] / total >= math.comb(n, k)]
        if not full:
            break
        for k in full:
            alloc[k] = math.comb(n, k)
            remaining -= alloc[k]
            open_sizes.remove(k)
    if open_sizes and remaining > 0:
        total = sum(mass[k] for k in open_sizes)
        shares = {k: remaining * mass[k] / total for k in open_sizes}
        floors = {k: int(math.floor(s)) for k, s in shares.items()}
        left = remaining - sum(floors.values())
        # largest remainder, ties broken by size
        for k in sorted(open_sizes, key=lambda k: (-(shares[k] - floors[k]), k))[:left]:
            floors[k] += 1
        alloc.update(floors)
    return alloc


def _sample_subsets(n: int, k: int, count: int, rng: np.random.Generator) -> list[int]:
    total = math.comb(n, k)
    if count >= total:
        count = total
    if total <= 200_000:
        combos = list(itertools.combinations(range(n), k))
        picks = rng.choice(total, size=count, replace=False)
        return [sum(1 << i for i in combos[p]) for p in sorted(picks)]
    chosen: set[int] = set()
    while len(chosen) < count:
        idx = rng.choice(n, size=k, replace=False)
        chosen.add(int(sum(1 << int(i) for i in idx)))
    return sorted(chosen)


def enumerate_coalitions(
    n: int,
    budget: Optional[int] = None,
    seed=0,
    scheme: KernelScheme = KernelScheme.STANDARD,
) -> np.ndarray:
    """Proper, non-empty coalitions of ``n`` features as a boolean mask array.

    Without a budget (or when the budget covers all ``2**n - 2`` of them) every
    proper coalition is returned, ordered by size and then by integer value.
    Otherwise all singletons and all ``(n-1)``-sized coalitions are kept and the
    rest of the budget is spread over the middle sizes in proportion to their
    kernel mass, sampling distinct coalitions within each size.
    """
    if n < 1:
        raise ValidationError("need at least one feature")
    n_proper = (1 << n) - 2 if n < 63 else None
    if budget is None or (n_proper is not None and n_proper <= budget):
        if n > 24:
            raise ValidationError(f"exhaustive enumeration of {n} features is infeasible; set a budget")
        return _ordered(range(1, (1 << n) - 1), n)
    if budget < 2 * n:
        raise ValidationError(f"budget {budget} is below the minimum 2*n = {2 * n}")
    rng = np.random.default_rng(seed)
    full = (1 << n) - 1
    values = [1 << i for i in range(n)] + [full ^ (1 << i) for i in range(n)]
    for k, count in sorted(_size_allocation(n, budget - 2 * n, scheme).items()):
        if count:
            values.extend(_sample_subsets(n, k, count, rng))
    return _ordered(values, n)


def coalition_weights(masks: np.ndarray, scheme: KernelScheme = KernelScheme.STANDARD) -> np.ndarray:
    """Regression weight per coalition.

    Each coalition gets its kernel weight scaled by ``C(n, k) / m_k`` where
    ``m_k`` is how many size-``k`` coalitions are present, so a partially
    sampled size carries the same total mass as the exhaustive one.
    """
    masks = np.asarray(masks, dtype=bool)
    n = masks.shape[1]
    sizes = masks.sum(1)
    counts = np.bincount(sizes, minlength=n + 1)
    return np.array(
        [shapley_kernel_weight(n, int(k), scheme) * math.comb(n, int(k)) / counts[k] for k in sizes]
    )


def mask_with_coalition(background: np.ndarray, instance: np.ndarray, mask) -> np.ndarray:
    """Copy of ``background`` whose coalition columns are overwritten by ``instance``."""
    background = np.asarray(background, dtype=float)
    instance = np.asarray(instance, dtype=float).ravel()
    mask = np.asarray(mask, dtype=bool).ravel()
    if background.ndim != 2 or not (background.shape[1] == instance.size == mask.size):
        raise DimensionError(
            f"background {background.shape}, instance {instance.size}, coalition {mask.size}"
        )
    return np.where(mask, instance, background)


def stack_coalitions(background: np.ndarray, instance: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """All coalition datasets stacked coalition-major: shape ``(k * |B|, n)``."""
    masks = np.asarray(masks, dtype=bool)
    if masks.shape[1] != background.shape[1] or instance.size != background.shape[1]:
        raise DimensionError(
            f"background {background.shape}, instance {instance.size}, coalitions {masks.shape}"
        )
    out = np.where(masks[:, None, :], instance[None, None, :], background[None, :, :])
    return out.reshape(-1, background.shape[1])
