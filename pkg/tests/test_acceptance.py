"""Acceptance checks. Each test records one or more pass/fail lines per criterion;
the per-criterion verdicts are printed in the terminal summary.

Run alone with ``pytest tests/test_acceptance.py`` (the full experiment grid
takes about an hour on one core) or as ``python tests/test_acceptance.py``.
"""

import sys
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import expit

from conftest import record
from latentshap.baselines import naive_transform_explanation
from latentshap.cli import main as cli_main
from latentshap.core import ProximityConfig, proximity
from latentshap.experiment import LATENT, NAIVE, noise_spearman
from latentshap.external import ExternalModelSpec, ExternalTransform, external_model_predict
from latentshap.kernel_shap import (
    KernelShapConfig,
    brute_force_shapley,
    explain_kernel_shap,
    explain_with_inverse_transform,
)
from latentshap.latent import LatentShapConfig, Weighting, approximate_predictions, explain_latent_shap
from latentshap.synthetic import (
    SyntheticSpec,
    fit_pca,
    generate_dataset,
    sample_covariance,
    train_logistic_regression,
)
from latentshap.transforms import FunctionTransform, IdentityTransform

GRID_SIZES = (50, 100, 200)
GRID_ALPHAS = (0.0, 0.05, 0.10, 0.15, 0.20, 0.30, 0.50)


def classifier_world(n: int, seed: int):
    """Gaussian data with the half-split labelling rule on ``n`` features, plus a trained classifier."""
    spec = SyntheticSpec(dim=n, seed=seed)
    X = generate_dataset(spec, sample_covariance(spec))
    h = n // 2
    y = (X[:, :h].sum(1) - X[:, h:].sum(1) > 0).astype(int)
    return X, train_logistic_regression(X[:500], y[:500], seed=seed)


# 1 ---------------------------------------------------------------------------

def test_criterion_1_oracle_equivalence():
    start = time.perf_counter()
    worst = 0.0
    cases = 0
    for n in (3, 5, 8):
        X, model = classifier_world(n, seed=100 + n)
        rng = np.random.default_rng(n)
        for _ in range(50):
            B = X[:500][rng.choice(500, 50, replace=False)]
            x = X[500 + rng.integers(500)]
            ks = explain_kernel_shap(model, B, x)
            bf = brute_force_shapley(model, B, x)
            worst = max(worst, float(np.max(np.abs(ks.attributions - bf.attributions))))
            cases += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 120 and cases == 150
    record(1, ok, f"{cases} instances over n in (3, 5, 8): max |diff| = {worst:.2e} (<= 1e-6), {elapsed:.1f}s (< 120s)")
    assert ok


# 2 ---------------------------------------------------------------------------

def _random_case(seed: int):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    A = rng.normal(size=(n, n))
    X = rng.normal(size=(200, n)) @ A
    kind = seed % 3
    w, b = rng.normal(size=n), rng.normal()
    if kind == 0:
        f = lambda Z: expit(Z @ w + b)
    elif kind == 1:
        f = lambda Z: Z @ w + b
    else:
        f = lambda Z: np.tanh(Z @ w) * (Z[:, 0] - b) ** 2
    B = X[rng.choice(150, int(rng.integers(3, 25)), replace=False)]
    x = X[150 + rng.integers(50)]
    return rng, n, X, f, B, x


def _count_property(check, examples: int, what: str) -> tuple[int, float]:
    stats = {"cases": 0, "worst": 0.0}

    @settings(max_examples=examples, deadline=None, database=None)
    @given(st.integers(0, 2 ** 40))
    def run(seed):
        stats["worst"] = max(stats["worst"], check(seed))
        stats["cases"] += 1

    try:
        run()
    except Exception:
        record(2, False, f"{what}: property violated")
        raise
    return stats["cases"], stats["worst"]


def test_criterion_2_local_accuracy_kernel_shap():
    def check(seed):
        rng, n, X, f, B, x = _random_case(seed)
        budget = None if rng.random() < 0.7 or n < 4 else int(rng.integers(2 * n, 2 ** n - 2))
        e = explain_kernel_shap(f, B, x, KernelShapConfig(coalition_budget=budget, seed=seed % 97))
        return abs(e.base_value + e.attributions.sum() - f(x[None])[0])

    cases, worst = _count_property(check, 200, "Kernel SHAP")
    ok = cases >= 200 and worst <= 1e-8
    record(2, ok, f"Kernel SHAP: {cases} cases, max |base + sum(phi) - f(x)| = {worst:.2e}")
    assert ok


def test_criterion_2_local_accuracy_inverse_transform():
    def check(seed):
        rng, n, X, f, B, x = _random_case(seed)
        e = explain_with_inverse_transform(f, fit_pca(X), B, x)
        return abs(e.base_value + e.attributions.sum() - f(x[None])[0])

    cases, worst = _count_property(check, 200, "inverse-transform explainer")
    ok = cases >= 200 and worst <= 1e-8
    record(2, ok, f"inverse-transform explainer: {cases} cases, max |base + sum(phi) - f(x)| = {worst:.2e}")
    assert ok


def test_criterion_2_latent_full_coalition_constraint():
    def check(seed):
        rng, n, X, f, B, x = _random_case(seed)
        m = int(rng.integers(1, 6))
        W = rng.normal(size=(n, m))
        t = FunctionTransform(lambda Z: np.sin(Z @ W))
        cfg = LatentShapConfig(weighting=list(Weighting)[int(rng.integers(2))], fast=bool(rng.random() < 0.7),
                               seed=seed % 1000)
        e = explain_latent_shap(f, t, B, x, cfg)
        return abs(e.base_value + e.attributions.sum() - e.meta["full_label"])

    cases, worst = _count_property(check, 200, "Latent SHAP")
    ok = cases >= 200 and worst <= 1e-8
    record(2, ok, f"Latent SHAP: {cases} cases, max |base + sum(phi) - full label| = {worst:.2e}")
    assert ok


# 3 ---------------------------------------------------------------------------

def test_criterion_3_classifier_accuracy(world):
    acc = world.test_accuracy
    ok = 0.95 <= acc <= 1.0
    record(3, ok, f"test accuracy {acc:.3f} on the 500 held-out rows (8 features, 1,000 samples)")
    assert ok


# 4-6: full default grid --------------------------------------------------------

@pytest.mark.slow
def test_criterion_4_headline_fidelity(default_experiment):
    cell = default_experiment.cell(LATENT, 200, 0.0)
    secs = default_experiment.cell_seconds[(200, 0.0)]
    ok = cell.mean_cosine >= 0.85 and secs < 600 and cell.n == 100
    record(4, ok, f"mean cosine {cell.mean_cosine:.4f} (>= 0.85) over n={cell.n}, cell runtime {secs:.0f}s (< 600s)")
    assert ok


@pytest.mark.slow
def test_criterion_5_naive_dominated(default_experiment):
    bad = []
    for size in GRID_SIZES:
        for alpha in GRID_ALPHAS:
            lat = default_experiment.cell(LATENT, size, alpha).mean_cosine
            nv = default_experiment.cell(NAIVE, size, alpha).mean_cosine
            if not lat > nv:
                bad.append(f"({size}, {alpha}): {lat:.3f} vs {nv:.3f}")
    margin = min(default_experiment.cell(LATENT, s, a).mean_cosine - default_experiment.cell(NAIVE, s, a).mean_cosine
                 for s in GRID_SIZES for a in GRID_ALPHAS)
    ok = not bad
    record(5, ok, f"21 cells, smallest Latent SHAP - naive margin {margin:.3f}" + (f"; losing cells {bad}" if bad else ""))
    assert ok


@pytest.mark.slow
def test_criterion_6_noise_degradation(default_experiment):
    band = {(s, a): default_experiment.cell(LATENT, s, a).mean_cosine for s in (100, 200) for a in (0.05, 0.10)}
    band_ok = all(0.70 <= v <= 0.97 for v in band.values())
    record(6, band_ok, "band [0.70, 0.97]: " + ", ".join(f"({s}, {a}) = {v:.3f}" for (s, a), v in band.items()))
    rho = noise_spearman(default_experiment)
    rho_ok = all(r <= -0.8 for r in rho.values())
    curves = "; ".join(
        f"{s}: " + " ".join(f"{v:.3f}" for v in default_experiment.curve(LATENT, s)) for s in GRID_SIZES
    )
    record(6, rho_ok, "Spearman(alpha, cosine) <= -0.8: " + ", ".join(f"|B|={s}: {r:+.3f}" for s, r in rho.items())
           + f" | curves {curves}")
    assert band_ok and rho_ok


# 7 ---------------------------------------------------------------------------

def test_criterion_7_identity_transform(world):
    rng = np.random.default_rng(7)
    checked = 0
    ok = True
    for trial in range(10):
        B = world.X_train[rng.choice(500, int(rng.integers(10, 60)), replace=False)]
        x = world.X_test[trial]
        cfg = KernelShapConfig(coalition_budget=None if trial % 2 else 60, seed=trial)
        ks = explain_kernel_shap(world.model, B, x, cfg)
        inv = explain_with_inverse_transform(world.model, IdentityTransform(), B, x, cfg)
        nv = naive_transform_explanation(world.model, IdentityTransform(), B, x, cfg)
        ok &= np.array_equal(ks.attributions, inv.attributions) and ks.base_value == inv.base_value
        ok &= np.array_equal(ks.attributions, nv.attributions) and ks.base_value == nv.base_value
        checked += 1
    record(7, ok, f"{checked} instances (exhaustive and budgeted): inverse-transform and naive outputs bit-identical")
    assert ok


# 8 ---------------------------------------------------------------------------

def test_criterion_8_deterministic_csv(tmp_path):
    import json

    cfg = {"background_sizes": [50, 100], "n_test_instances": 5, "master_seed": 3}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    outs = []
    for k in range(2):
        code = cli_main(["experiment", "synthetic", "--config", str(tmp_path / "cfg.json"),
                         "--out", str(tmp_path / f"run{k}")])
        assert code == 0
        outs.append((tmp_path / f"run{k}" / "results.csv").read_bytes())
    ok = outs[0] == outs[1]
    rows = outs[0].decode().count("\n") - 1
    record(8, ok, f"two CLI runs, {rows} data rows each: results.csv byte-identical = {ok}")
    assert ok


# 9 ---------------------------------------------------------------------------

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_criterion_9_proximity_symmetry():
    @settings(max_examples=300, deadline=None)
    @given(st.integers(1, 6).flatmap(lambda n: st.tuples(arrays(float, n, elements=finite),
                                                         arrays(float, n, elements=finite))),
           st.floats(0.01, 1e3))
    def check(pair, sigma):
        a, b = pair
        cfg = ProximityConfig(bandwidth=sigma)
        assert proximity(a, b, cfg) == proximity(b, a, cfg)

    try:
        check()
    except Exception:
        record(9, False, "proximity symmetry")
        raise
    record(9, True, "proximity symmetry (300 cases)")


def test_criterion_9_convex_combination():
    @settings(max_examples=300, deadline=None)
    @given(st.integers(1, 10).flatmap(lambda r: st.tuples(
        arrays(float, (r, 4), elements=st.floats(1e-300, 1.0)), arrays(float, r, elements=st.floats(-1e6, 1e6)))),
        st.sampled_from(list(Weighting)))
    def check(Mv, weighting):
        M, y = Mv
        out = approximate_predictions(M, y, weighting)
        tol = 1e-9 * (1 + np.abs(y).max())
        assert np.all(out >= y.min() - tol) and np.all(out <= y.max() + tol)

    try:
        check()
    except Exception:
        record(9, False, "convex-combination bounds")
        raise
    record(9, True, "approximated predictions within [min, max] of latent labels (300 cases, both weightings)")


def test_criterion_9_pca_round_trip():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(20):
        d = int(rng.integers(2, 12))
        X = rng.normal(size=(300, d)) @ rng.normal(size=(d, d))
        pca = fit_pca(X)
        Z = rng.normal(size=(100, d)) * X.std(0)
        worst = max(worst, float(np.max(np.abs(pca.inverse(pca.forward(Z)) - Z))))
    ok = worst < 1e-8
    record(9, ok, f"PCA round trip at full rank: max error {worst:.2e} (< 1e-8)")
    assert ok


def test_criterion_9_dummy_feature(world):
    rng = np.random.default_rng(19)
    worst = 0.0
    f = lambda Z: world.model(np.column_stack([Z[:, :3], np.zeros(len(Z)), Z[:, 4:]]))
    for _ in range(20):
        B = world.X_train[rng.choice(500, 40, replace=False)]
        x = world.X_test[rng.integers(500)]
        worst = max(worst, abs(explain_kernel_shap(f, B, x).attributions[3]),
                    abs(brute_force_shapley(f, B, x).attributions[3]))
    ok = worst <= 1e-6
    record(9, ok, f"dummy feature attribution: max |phi| = {worst:.2e} (<= 1e-6)")
    assert ok


def test_criterion_9_permutation_equivariance(world):
    rng = np.random.default_rng(29)
    worst_ks = worst_lat = 0.0
    for _ in range(5):
        perm = rng.permutation(8)
        inv = np.argsort(perm)
        B = world.X_train[rng.choice(500, 30, replace=False)]
        x = world.X_test[rng.integers(500)]
        a = explain_kernel_shap(world.model, B, x).attributions
        b = explain_kernel_shap(lambda Z: world.model(Z[:, inv]), B[:, perm], x[perm]).attributions
        worst_ks = max(worst_ks, float(np.max(np.abs(b - a[perm]))))
        tp = FunctionTransform(lambda Z: world.pca.forward(Z)[:, perm])
        la = explain_latent_shap(world.model, world.pca, B, x).attributions
        lb = explain_latent_shap(world.model, tp, B, x).attributions
        worst_lat = max(worst_lat, float(np.max(np.abs(lb - la[perm]))))
    ok = worst_ks < 1e-10 and worst_lat < 1e-7
    record(9, ok, f"permutation equivariance: Kernel SHAP {worst_ks:.1e} (< 1e-10), Latent SHAP {worst_lat:.1e} (< 1e-7)")
    assert ok


def test_criterion_9_adapter_round_trip(python_cmd):
    rng = np.random.default_rng(39)
    X = rng.normal(size=(10_000, 8)) * 10.0 ** rng.integers(-6, 6, (10_000, 8))
    spec = ExternalModelSpec(python_cmd("echo_first.py"))
    out = external_model_predict(spec, X)
    rows = ExternalTransform(python_cmd("echo_rows.py")).forward(X)
    ok = np.array_equal(out, X[:, 0]) and np.array_equal(rows, X)
    record(9, ok, "external adapter: 10,000 rows in one call, exact echo of values and full rows")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
