import dataclasses
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from latentshap.errors import CellError, ValidationError
from latentshap.experiment import (
    LATENT,
    NAIVE,
    ExperimentConfig,
    format_csv,
    noise_spearman,
    render_svg,
    run_synthetic_experiment,
    write_results,
)

SMALL = dict(background_sizes=[10, 20], alphas=[0.0, 0.3], n_test_instances=3, master_seed=0)


@pytest.fixture(scope="module")
def small(world):
    return run_synthetic_experiment(ExperimentConfig(**SMALL), world)


@pytest.mark.parametrize("bad", [
    {"alphas": []},
    {"alphas": [0.1, 1.5]},
    {"alphas": [0.1, 0.1]},
    {"background_sizes": [0]},
    {"background_sizes": [501]},
    {"n_test_instances": 501},
    {"n_jobs": 0},
])
def test_config_validation(bad):
    with pytest.raises(ValidationError):
        ExperimentConfig(**bad)


def test_config_from_dict():
    cfg = ExperimentConfig.from_dict({"alphas": [0.0, 0.2], "latent": {"weighting": "normalized"},
                                      "kernel": {"coalition_budget": 40}})
    assert cfg.alphas == (0.0, 0.2) and cfg.kernel_cfg.coalition_budget == 40
    assert cfg.latent_cfg.weighting.value == "normalized"
    with pytest.raises(ValidationError, match="unknown"):
        ExperimentConfig.from_dict({"alpha": [0.1]})
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict({"kernel": {"nonsense": 1}})
    # worker count does not change what is computed
    assert ExperimentConfig(n_jobs=2).to_dict() == ExperimentConfig().to_dict()


def test_small_run_shape(small):
    assert len(small.cells) == 2 * 2 * 2
    for key, c in small.cells.items():
        assert c.n == 3 and -1.0 <= c.mean_cosine <= 1.0
        assert c.std_cosine == pytest.approx(small.cosines[key].std())
    assert set(small.cell_seconds) == {(s, a) for s in (10, 20) for a in (0.0, 0.3)}
    assert small.cell(LATENT, 10, 0.0).mean_cosine > small.cell(NAIVE, 10, 0.0).mean_cosine


def test_rerun_and_parallel_match(small, world):
    again = run_synthetic_experiment(ExperimentConfig(**SMALL), world)
    assert format_csv(again) == format_csv(small)
    par = run_synthetic_experiment(ExperimentConfig(**SMALL, n_jobs=2), world)
    assert format_csv(par) == format_csv(small)


def test_noise_free_cells_ignore_other_alphas(small, world):
    only_clean = run_synthetic_experiment(ExperimentConfig(**{**SMALL, "alphas": [0.0]}), world)
    for size in (10, 20):
        assert only_clean.cell(LATENT, size, 0.0) == small.cell(LATENT, size, 0.0)


def test_csv_layout(small):
    lines = format_csv(small).splitlines()
    assert lines[0] == "method,background_size,alpha,mean_cosine,std_cosine,n,seed"
    assert len(lines) == 9
    assert [ln.split(",")[0] for ln in lines[1:]] == [LATENT] * 4 + [NAIVE] * 4
    first = lines[1].split(",")
    assert first[1:3] == ["10", "0.0"] and float(first[3]) == small.cell(LATENT, 10, 0.0).mean_cosine


def test_outputs_written(small, tmp_path):
    paths = write_results(small, tmp_path / "out")
    assert sorted(p.name for p in paths) == ["cosine_vs_alpha_size_10.svg", "cosine_vs_alpha_size_20.svg",
                                             "manifest.json", "results.csv"]
    root = ET.fromstring((tmp_path / "out" / "cosine_vs_alpha_size_10.svg").read_text())
    assert root.tag.endswith("svg")
    m = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert m["config_hash"] == small.config_hash and m["master_seed"] == 0
    assert set(m["latent_spearman_alpha_vs_cosine"]) == {"10", "20"}
    assert m["config"]["synthetic"]["seed"] == 0


def test_svg_is_deterministic(small):
    assert render_svg(small, 10) == render_svg(small, 10)


def test_failures_name_the_cell(world):
    broken = dataclasses.replace(world, model=lambda X: np.full(len(X), np.nan))
    with pytest.raises(CellError, match=r"size=10.*instance=0"):
        run_synthetic_experiment(ExperimentConfig(background_sizes=[10], alphas=[0.0], n_test_instances=1), broken)


@pytest.mark.slow
def test_default_grid_shape(default_experiment):
    assert len(format_csv(default_experiment).splitlines()) == 1 + 42
    assert all(c.n == 100 for c in default_experiment.cells.values())
    assert set(noise_spearman(default_experiment)) == {50, 100, 200}


@pytest.mark.slow
def test_larger_background_helps_at_zero_noise(default_experiment):
    small_b = default_experiment.cell(LATENT, 50, 0.0).mean_cosine
    large_b = default_experiment.cell(LATENT, 200, 0.0).mean_cosine
    assert large_b >= small_b - 0.02
