"""Controlled synthetic world: correlated Gaussian data, a linear labelling rule,
a logistic-regression classifier, a PCA transform and keyed transform noise."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .core import as_matrix, default_names
from .errors import DimensionError, TrainingError, ValidationError
from .transforms import Transform, apply_forward


@dataclass(frozen=True)
class SyntheticSpec:
    dim: int = 8
    n_samples: int = 1000
    cov_low: float = 1.0
    cov_high: float = 12.0
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValidationError("dim must be at least 2")
        if self.n_samples < 1:
            raise ValidationError("n_samples must be positive")
        if not self.cov_low < self.cov_high:
            raise ValidationError("cov_low must be below cov_high")

    def to_dict(self) -> dict:
        return {"dim": self.dim, "n_samples": self.n_samples, "cov_low": self.cov_low,
                "cov_high": self.cov_high, "seed": self.seed}


def sample_covariance(spec: SyntheticSpec) -> np.ndarray:
    """Symmetric matrix with uniform entries, repaired to be PSD by eigenvalue clipping."""
    rng = np.random.default_rng([spec.seed, 0])
    upper = np.triu(rng.uniform(spec.cov_low, spec.cov_high, (spec.dim, spec.dim)))
    A = upper + np.triu(upper, 1).T
    w, V = np.linalg.eigh(A)
    S = (V * np.clip(w, 1e-6, None)) @ V.T
    return (S + S.T) / 2


def _sqrt_factor(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(cov)
        return V * np.sqrt(np.clip(w, 0.0, None))


def generate_dataset(spec: SyntheticSpec, cov: np.ndarray) -> np.ndarray:
    cov = as_matrix(cov, "covariance")
    if cov.shape != (spec.dim, spec.dim):
        raise DimensionError(f"covariance {cov.shape} for dim {spec.dim}")
    rng = np.random.default_rng([spec.seed, 1])
    return rng.standard_normal((spec.n_samples, spec.dim)) @ _sqrt_factor(cov).T


def label(x) -> np.ndarray:
    """1 where the first half of the features outweighs the second half, else 0.

    Accepts a single vector or a matrix of rows. Ties go to 0.
    """
    X = np.asarray(x, dtype=float)
    n = X.shape[-1]
    if n < 2 or n % 2:
        raise DimensionError(f"labelling needs an even number of features, got {n}")
    h = n // 2
    return (X[..., :h].sum(-1) - X[..., h:].sum(-1) > 0).astype(int)


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    trained: bool = False
    epochs_run: int = 0
    grad_norm: float = float("nan")

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise ValidationError("logistic parameters must be finite")

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.weights.size:
            raise DimensionError(f"model expects {self.weights.size} features, got {X.shape[-1]}")
        return expit(X @ self.weights + self.bias)

    __call__ = predict_proba

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) > 0.5).astype(int)

    def accuracy(self, X, y) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y)))

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": float(self.bias)}


def train_logistic_regression(X, y, epochs: int = 1000, lr: float = 0.1, seed: int = 0,
                              tol: float = 1e-6, accuracy_floor: float = 0.0) -> LogisticModel:
    """Full-batch gradient descent on mean binary cross-entropy."""
    X = as_matrix(X, "training data")
    y = np.asarray(y, dtype=float).ravel()
    if y.size != X.shape[0]:
        raise DimensionError(f"{X.shape[0]} rows but {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("labels must be 0 or 1")
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.01, X.shape[1])
    b = 0.0
    gnorm = float("inf")
    epoch = 0
    for epoch in range(1, epochs + 1):
        r = expit(X @ w + b) - y
        gw = X.T @ r / y.size
        gb = r.mean()
        gnorm = float(np.sqrt(gw @ gw + gb * gb))
        if not np.isfinite(gnorm):
            raise TrainingError(f"gradient became non-finite at epoch {epoch}; lower the learning rate")
        if gnorm < tol:
            break
        w -= lr * gw
        b -= lr * gb
    model = LogisticModel(w, float(b), trained=True, epochs_run=epoch, grad_norm=gnorm)
    acc = model.accuracy(X, y)
    if acc < accuracy_floor:
        raise TrainingError(
            f"training accuracy {acc:.3f} below floor {accuracy_floor} after {epoch} epochs "
            f"(gradient norm {gnorm:.2e}, lr {lr})"
        )
    return model


class PcaTransform(Transform):
    """Projection onto the leading principal axes.

    ``forward(X) = (X - mean) @ components.T`` and
    ``inverse(Z) = Z @ components + mean``; the round trip is exact only when
    every component is retained.
    """

    invertible = True

    def __init__(self, components, mean, feature_names: Optional[list[str]] = None):
        self.components = as_matrix(components, "components")
        self.mean = np.asarray(mean, dtype=float).ravel()
        if self.components.shape[1] != self.mean.size:
            raise DimensionError(f"components {self.components.shape} for mean of length {self.mean.size}")
        gram = self.components @ self.components.T
        if not np.allclose(gram, np.eye(self.retained), atol=1e-8, rtol=0):
            raise ValidationError("PCA components are not orthonormal")
        self.feature_names = feature_names or [f"pc{i + 1}" for i in range(self.retained)]

    @property
    def retained(self) -> int:
        return self.components.shape[0]

    def forward(self, X):
        X = np.asarray(X, dtype=float)
        return (X - self.mean) @ self.components.T

    def inverse(self, Z):
        return np.asarray(Z, dtype=float) @ self.components + self.mean

    def to_dict(self) -> dict:
        return {"components": self.components.tolist(), "mean": self.mean.tolist(),
                "feature_names": list(self.feature_names)}

    @classmethod
    def from_dict(cls, d: dict) -> "PcaTransform":
        try:
            return cls(d["components"], d["mean"], d.get("feature_names"))
        except KeyError as e:
            raise ValidationError(f"PCA JSON is missing {e}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "PcaTransform":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_pca(X, retained: Optional[int] = None) -> PcaTransform:
    X = as_matrix(X, "data")
    d = X.shape[1]
    retained = d if retained is None else int(retained)
    if not 1 <= retained <= d:
        raise ValidationError(f"retained must be in [1, {d}], got {retained}")
    mean = X.mean(0)
    cov = np.cov(X - mean, rowvar=False).reshape(d, d)
    w, V = np.linalg.eigh(cov)
    comps = V[:, np.argsort(w)[::-1][:retained]].T
    # sign convention: largest-magnitude loading positive
    lead = comps[np.arange(retained), np.argmax(np.abs(comps), axis=1)]
    comps = comps * np.where(lead < 0, -1.0, 1.0)[:, None]
    return PcaTransform(comps, mean)


_U64 = np.uint64


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finaliser
    z = z + _U64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


def keyed_normal(X: np.ndarray, seed: int, n_out: int) -> np.ndarray:
    """Standard normals that depend only on (seed, row contents, output column)."""
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64) + 0.0)  # -0.0 -> 0.0
    bits = X.view(np.uint64).reshape(X.shape[0], -1)
    with np.errstate(over="ignore"):
        h = np.full(X.shape[0], _U64(seed & 0xFFFFFFFFFFFFFFFF))
        for k in range(bits.shape[1]):
            h = _mix(h ^ bits[:, k])
        out = np.empty((X.shape[0], n_out))
        for i in range(n_out):
            a = _mix(h ^ _U64(2 * i + 1))
            b = _mix(a)
            u1 = ((a >> _U64(11)).astype(np.float64) + 0.5) / 2.0 ** 53
            u2 = (b >> _U64(11)).astype(np.float64) / 2.0 ** 53
            out[:, i] = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return out


class NoisyTransform(Transform):
    """Wraps a transform and adds N(0, (alpha * std_i)**2) noise to output ``i``.

    The noise is a hash of the input row, so the result is still a function of
    its input. The wrapped transform's inverse is not exposed.
    """

    invertible = False

    def __init__(self, base: Transform, alpha: float, feature_stds, seed: int):
        if alpha < 0:
            raise ValidationError(f"alpha must be non-negative, got {alpha}")
        self.base = base
        self.alpha = float(alpha)
        self.feature_stds = np.asarray(feature_stds, dtype=float).ravel()
        self.seed = int(seed)
        self.feature_names = getattr(base, "feature_names", None)

    def forward(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Z = apply_forward(self.base, X)
        if self.alpha == 0:
            return Z
        if Z.shape[1] != self.feature_stds.size:
            raise DimensionError(f"{self.feature_stds.size} stds for {Z.shape[1]} transform outputs")
        return Z + self.alpha * self.feature_stds * keyed_normal(X, self.seed, Z.shape[1])


def add_noise_to_transform(t: Transform, alpha: float, feature_stds, seed: int) -> NoisyTransform:
    return NoisyTransform(t, alpha, feature_stds, seed)


def transform_feature_stds(t: Transform, X) -> np.ndarray:
    return apply_forward(t, as_matrix(X)).std(0)


@dataclass
class SyntheticWorld:
    spec: SyntheticSpec
    cov: np.ndarray
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    model: LogisticModel
    pca: PcaTransform
    pc_stds: np.ndarray
    test_accuracy: float = field(default=float("nan"))


def build_world(spec: Optional[SyntheticSpec] = None, train_fraction: float = 0.5) -> SyntheticWorld:
    """Data, classifier and full-rank PCA, all fitted on the training half."""
    spec = spec or SyntheticSpec()
    cov = sample_covariance(spec)
    X = generate_dataset(spec, cov)
    y = label(X)
    n_train = int(round(spec.n_samples * train_fraction))
    Xtr, ytr, Xte, yte = X[:n_train], y[:n_train], X[n_train:], y[n_train:]
    model = train_logistic_regression(Xtr, ytr, seed=spec.seed)
    pca = fit_pca(Xtr)
    return SyntheticWorld(spec, cov, Xtr, ytr, Xte, yte, model, pca,
                          transform_feature_stds(pca, Xtr), model.accuracy(Xte, yte))


def write_csv(path, X, feature_names: Optional[Sequence[str]] = None) -> None:
    X = as_matrix(X)
    names = list(feature_names) if feature_names is not None else default_names(X.shape[1])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in X:
            w.writerow(["%.17g" % v for v in row])


def read_csv(path) -> tuple[np.ndarray, list[str]]:
    """Read a numeric CSV; a non-numeric first row is taken as the header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValidationError(f"{path}: empty CSV")
    names: Optional[list[str]] = None
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        names, rows = [c.strip() for c in rows[0]], rows[1:]
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    width = len(rows[0])
    try:
        data = [[float(v) for v in r] for r in rows]
    except ValueError as e:
        raise ValidationError(f"{path}: {e}") from None
    if any(len(r) != width for r in data) or (names is not None and len(names) != width):
        raise ValidationError(f"{path}: ragged rows")
    return as_matrix(np.array(data), str(path)), names or default_names(width)
