"""Fidelity benchmark on the synthetic world.

For each background size and test instance the ground truth is Kernel SHAP in
PCA space through the exact inverse. Latent SHAP and the naive baseline then
explain the same instance through a noisy copy of the PCA transform, at every
noise level, and are scored by cosine similarity to the ground truth.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import spearmanr

from .baselines import transform_attributions
from .core import config_hash, cosine_similarity
from .errors import CellError, ValidationError
from .kernel_shap import KernelShapConfig, explain_kernel_shap, explain_with_inverse_transform
from .latent import LatentShapConfig, explain_latent_shap
from .synthetic import SyntheticSpec, SyntheticWorld, add_noise_to_transform, build_world

log = logging.getLogger(__name__)

LATENT = "LatentSHAP"
NAIVE = "Naive"
METHODS = (LATENT, NAIVE)
CSV_COLUMNS = ("method", "background_size", "alpha", "mean_cosine", "std_cosine", "n", "seed")


@dataclass(frozen=True)
class ExperimentConfig:
    background_sizes: tuple = (50, 100, 200)
    alphas: tuple = (0.0, 0.05, 0.10, 0.15, 0.20, 0.30, 0.50)
    n_test_instances: int = 100
    master_seed: int = 0
    latent_cfg: LatentShapConfig = field(default_factory=LatentShapConfig)
    kernel_cfg: KernelShapConfig = field(default_factory=KernelShapConfig)
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    n_jobs: int = 1
    output_dir: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "background_sizes", tuple(int(s) for s in self.background_sizes))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not self.background_sizes or any(s < 1 for s in self.background_sizes):
            raise ValidationError("background_sizes must be a non-empty list of positive counts")
        if not self.alphas or any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise ValidationError("alphas must be a non-empty list of values in [0, 1]")
        if len(set(self.alphas)) != len(self.alphas) or len(set(self.background_sizes)) != len(self.background_sizes):
            raise ValidationError("background_sizes and alphas must not repeat")
        if self.n_test_instances < 1:
            raise ValidationError("n_test_instances must be positive")
        if self.n_jobs < 1:
            raise ValidationError("n_jobs must be positive")
        n_train = int(round(self.synthetic.n_samples / 2))
        if max(self.background_sizes) > n_train:
            raise ValidationError(f"background size {max(self.background_sizes)} exceeds {n_train} training rows")
        if self.n_test_instances > self.synthetic.n_samples - n_train:
            raise ValidationError(f"only {self.synthetic.n_samples - n_train} test rows are available")

    def to_dict(self) -> dict:
        """Everything that affects results (worker count and output path excluded)."""
        return {
            "background_sizes": list(self.background_sizes),
            "alphas": list(self.alphas),
            "n_test_instances": self.n_test_instances,
            "master_seed": self.master_seed,
            "latent": self.latent_cfg.to_dict(),
            "kernel": self.kernel_cfg.to_dict(),
            "synthetic": dataclasses.replace(self.synthetic, seed=self.master_seed).to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {"background_sizes", "alphas", "n_test_instances", "master_seed", "latent", "kernel",
                 "synthetic", "n_jobs", "output_dir"}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown experiment config keys: {sorted(unknown)}")
        kw = {k: d[k] for k in ("background_sizes", "alphas", "n_test_instances", "master_seed",
                                "n_jobs", "output_dir") if k in d}
        try:
            if "latent" in d:
                kw["latent_cfg"] = LatentShapConfig.from_dict(d["latent"])
            if "kernel" in d:
                kw["kernel_cfg"] = KernelShapConfig(**d["kernel"])
            if "synthetic" in d:
                kw["synthetic"] = SyntheticSpec(**d["synthetic"])
            return cls(**kw)
        except TypeError as e:
            raise ValidationError(f"bad experiment config: {e}") from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class CellStats:
    mean_cosine: float
    std_cosine: float
    n: int


@dataclass
class ExperimentResult:
    cells: dict
    config: ExperimentConfig
    config_hash: str
    seed: int
    test_accuracy: float
    cosines: dict = field(default_factory=dict)
    cell_seconds: dict = field(default_factory=dict)

    def cell(self, method: str, size: int, alpha: float) -> CellStats:
        return self.cells[(method, int(size), float(alpha))]

    def rows(self) -> list[tuple]:
        out = []
        for (method, size, alpha) in sorted(self.cells, key=lambda k: (METHODS.index(k[0]), k[1], k[2])):
            c = self.cells[(method, size, alpha)]
            out.append((method, size, alpha, c.mean_cosine, c.std_cosine, c.n, self.seed))
        return out

    def curve(self, method: str, size: int) -> list[float]:
        return [self.cells[(method, size, a)].mean_cosine for a in self.config.alphas]


def _seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0])


def _run_job(world: SyntheticWorld, cfg: ExperimentConfig, size: int, instance: int) -> dict:
    master = cfg.master_seed
    rng = np.random.default_rng([master, size, instance, 0])
    B = world.X_train[rng.choice(world.X_train.shape[0], size, replace=False)]
    x = world.X_test[instance]
    # noise draws and bandwidth pairs are shared across noise levels; alpha only scales the noise
    noise_seed = _seed(master, size, instance, 1)
    latent_cfg = dataclasses.replace(cfg.latent_cfg, seed=_seed(master, size, instance, 2) % 2 ** 32)
    alpha = None
    try:
        t0 = time.perf_counter()
        truth = explain_with_inverse_transform(world.model, world.pca, B, x, cfg.kernel_cfg)
        ks = explain_kernel_shap(world.model, B, x, cfg.kernel_cfg)
        shared = time.perf_counter() - t0
        out = {"latent": {}, "naive": {}, "seconds": {}}
        for alpha in cfg.alphas:
            noisy = add_noise_to_transform(world.pca, alpha, world.pc_stds, noise_seed)
            t0 = time.perf_counter()
            lat = explain_latent_shap(world.model, noisy, B, x, latent_cfg)
            out["seconds"][alpha] = shared + time.perf_counter() - t0
            out["latent"][alpha] = cosine_similarity(truth.attributions, lat.attributions)
            naive = transform_attributions(noisy, ks)
            out["naive"][alpha] = cosine_similarity(truth.attributions, naive.attributions)
    except Exception as e:
        raise CellError(f"experiment failed at size={size}, alpha={alpha}, instance={instance}: {e}") from e
    return out


def _run_job_star(args):
    return _run_job(*args)


def run_synthetic_experiment(cfg: Optional[ExperimentConfig] = None,
                             world: Optional[SyntheticWorld] = None) -> ExperimentResult:
    cfg = cfg or ExperimentConfig()
    if world is None:
        spec = dataclasses.replace(cfg.synthetic, seed=cfg.master_seed)
        world = build_world(spec)
    jobs = [(size, i) for size in cfg.background_sizes for i in range(cfg.n_test_instances)]
    log.info("running %d jobs (%d sizes x %d instances), %d noise levels each",
             len(jobs), len(cfg.background_sizes), cfg.n_test_instances, len(cfg.alphas))
    if cfg.n_jobs == 1:
        outputs = []
        for k, (size, i) in enumerate(jobs):
            outputs.append(_run_job(world, cfg, size, i))
            log.debug("job %d/%d done (size %d, instance %d)", k + 1, len(jobs), size, i)
    else:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
            outputs = list(pool.map(_run_job_star, [(world, cfg, s, i) for s, i in jobs]))
    by_job = dict(zip(jobs, outputs))

    cells, cosines, seconds = {}, {}, {}
    for size in cfg.background_sizes:
        for alpha in cfg.alphas:
            runs = [by_job[(size, i)] for i in range(cfg.n_test_instances)]
            for method, key in ((LATENT, "latent"), (NAIVE, "naive")):
                vals = np.array([r[key][alpha] for r in runs])
                cosines[(method, size, alpha)] = vals
                cells[(method, size, alpha)] = CellStats(float(vals.mean()), float(vals.std()), int(vals.size))
            seconds[(size, alpha)] = float(sum(r["seconds"][alpha] for r in runs))
    return ExperimentResult(cells, cfg, config_hash(cfg.to_dict()), cfg.master_seed,
                            world.test_accuracy, cosines, seconds)


def noise_spearman(result: ExperimentResult, method: str = LATENT) -> dict:
    """Spearman correlation between noise level and mean cosine, per background size."""
    out = {}
    for size in result.config.background_sizes:
        rho = spearmanr(result.config.alphas, result.curve(method, size)).statistic
        out[size] = float(rho)
    return out


def format_csv(result: ExperimentResult) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for method, size, alpha, mean, std, n, seed in result.rows():
        lines.append(f"{method},{size},{alpha!r},{mean:.17g},{std:.17g},{n},{seed}")
    return "\n".join(lines) + "\n"


_COLORS = {LATENT: "#1f77b4", NAIVE: "#d62728"}


def render_svg(result: ExperimentResult, size: int, width: int = 480, height: int = 320) -> str:
    """Line chart of mean cosine against noise level for one background size."""
    alphas = list(result.config.alphas)
    curves = {m: result.curve(m, size) for m in METHODS}
    lo = min(0.0, np.floor(min(min(c) for c in curves.values()) * 10) / 10)
    hi = 1.0
    left, right, top, bottom = 56, 120, 36, 44
    pw, ph = width - left - right, height - top - bottom
    amax = max(alphas) if max(alphas) > 0 else 1.0

    def px(a):
        return left + pw * a / amax

    def py(v):
        return top + ph * (hi - v) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="18" text-anchor="middle" font-size="13">'
        f"Background dataset size = {size}</text>",
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for a in alphas:
        parts.append(f'<line x1="{px(a):.1f}" y1="{top + ph}" x2="{px(a):.1f}" y2="{top + ph + 4}" stroke="black"/>')
        parts.append(f'<text x="{px(a):.1f}" y="{top + ph + 16}" text-anchor="middle">{a:g}</text>')
    for v in np.linspace(lo, hi, int(round((hi - lo) / 0.2)) + 1):
        parts.append(f'<line x1="{left - 4}" y1="{py(v):.1f}" x2="{left + pw}" y2="{py(v):.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{left - 7}" y="{py(v) + 4:.1f}" text-anchor="end">{v:.1f}</text>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">noise ratio alpha</text>')
    parts.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {top + ph / 2:.1f})">mean cosine similarity</text>')
    for k, (method, ys) in enumerate(curves.items()):
        pts = " ".join(f"{px(a):.1f},{py(v):.1f}" for a, v in zip(alphas, ys))
        color = _COLORS[method]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for a, v in zip(alphas, ys):
            parts.append(f'<circle cx="{px(a):.1f}" cy="{py(v):.1f}" r="3" fill="{color}"/>')
        ly = top + 12 + 18 * k
        parts.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{left + pw + 36}" y="{ly + 4}">{method}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_results(result: ExperimentResult, out_dir) -> list[Path]:
    """Write results.csv, one SVG per background size and manifest.json."""
    from . import __version__

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "results.csv"]
        written[0].write_text(format_csv(result))
        for size in result.config.background_sizes:
            p = out / f"cosine_vs_alpha_size_{size}.svg"
            p.write_text(render_svg(result, size))
            written.append(p)
        manifest = {
            "config": result.config.to_dict(),
            "config_hash": result.config_hash,
            "master_seed": result.seed,
            "library_version": __version__,
            "classifier_test_accuracy": result.test_accuracy,
            "latent_spearman_alpha_vs_cosine": {str(k): v for k, v in noise_spearman(result).items()},
            "cell_seconds": {f"{s}/{a!r}": t for (s, a), t in sorted(result.cell_seconds.items())},
        }
        p = out / "manifest.json"
        p.write_text(json.dumps(manifest, indent=2) + "\n")
        written.append(p)
    except OSError as e:
        raise OSError(f"cannot write results to {out}: {e}") from e
    return written


def summarize(result: ExperimentResult, sizes: Optional[Sequence[int]] = None) -> str:
    sizes = sizes or result.config.background_sizes
    lines = ["size  alpha   latent   naive"]
    for s in sizes:
        for a in result.config.alphas:
            lines.append(f"{s:4d}  {a:5.2f}  {result.cell(LATENT, s, a).mean_cosine:7.3f}  "
                         f"{result.cell(NAIVE, s, a).mean_cosine:7.3f}")
    return "\n".join(lines)
