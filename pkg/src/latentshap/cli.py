"""Command-line entry point.

Exit status: 0 on success, 1 for usage errors, 2 for data errors and 3 when an
external model or transform fails. Diagnostics go to stderr as one line.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baselines import naive_transform_explanation
from .core import ProximityConfig, config_hash
from .errors import ExternalModelError, LatentShapError, ValidationError
from .experiment import ExperimentConfig, run_synthetic_experiment, summarize, write_results
from .external import ExternalModel, ExternalTransform
from .kernel_shap import KernelShapConfig, brute_force_shapley, explain_kernel_shap
from .latent import LatentShapConfig, explain_latent_shap
from .synthetic import LogisticModel, PcaTransform, SyntheticSpec, build_world, fit_pca, read_csv, write_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_EXTERNAL = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _world(seed: int):
    return build_world(SyntheticSpec(seed=seed))


def load_model(ref: str, timeout: float, world_seed: int):
    """``builtin:synthetic``, ``logistic:<model.json>`` or ``external:<command>``."""
    kind, _, rest = ref.partition(":")
    if kind == "external" and rest:
        return ExternalModel(rest, timeout)
    if kind == "logistic" and rest:
        d = _read_json(rest)
        try:
            return LogisticModel(d["weights"], float(d["bias"]), trained=True)
        except KeyError as e:
            raise ValidationError(f"{rest}: missing {e}") from None
    if ref == "builtin:synthetic":
        return _world(world_seed).model
    raise _UsageError(f"unknown model reference {ref!r}; use builtin:synthetic, logistic:FILE or external:CMD")


def load_transform(ref: str, timeout: float, world_seed: int):
    """``builtin:synthetic-pca``, ``external:<command>`` or a PCA JSON path."""
    kind, _, rest = ref.partition(":")
    if kind == "external" and rest:
        return ExternalTransform(rest, timeout)
    if ref == "builtin:synthetic-pca":
        return _world(world_seed).pca
    return PcaTransform.from_dict(_read_json(ref))


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: invalid JSON ({e.msg})") from None


def _read_matrix(path: str):
    try:
        return read_csv(path)
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e.strerror}") from None


def _instance(args) -> np.ndarray:
    X, _ = _read_matrix(args.instance)
    if not 0 <= args.row < X.shape[0]:
        raise ValidationError(f"{args.instance} has {X.shape[0]} rows; --row {args.row} is out of range")
    return X[args.row]


def _emit(expl, settings: dict) -> None:
    sys.stdout.write(expl.to_json(config_hash(settings)) + "\n")


def _kernel_cfg(args) -> KernelShapConfig:
    return KernelShapConfig(kernel_scheme=args.kernel, coalition_budget=args.budget, seed=args.seed,
                            ridge=args.ridge)


def cmd_explain(args) -> int:
    model = load_model(args.model, args.timeout, args.world_seed)
    B, names = _read_matrix(args.background)
    x = _instance(args)
    settings = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    if args.method == "kernel":
        expl = explain_kernel_shap(model, B, x, _kernel_cfg(args), feature_names=names)
    elif args.method == "naive":
        t = load_transform(args.transform, args.timeout, args.world_seed)
        expl = naive_transform_explanation(model, t, B, x, _kernel_cfg(args), linear_only=args.linear_only)
    else:
        t = load_transform(args.transform, args.timeout, args.world_seed)
        cfg = LatentShapConfig(
            proximity=ProximityConfig(args.distance, args.bandwidth),
            weighting=args.weighting,
            input_coalition_budget=args.input_budget,
            interp_coalition_budget=args.budget,
            kernel_scheme=args.kernel,
            seed=args.seed,
            global_bandwidth=args.global_bandwidth,
        )
        expl = explain_latent_shap(model, t, B, x, cfg)
    _emit(expl, settings)
    return EXIT_OK


def cmd_oracle(args) -> int:
    model = load_model(args.model, args.timeout, args.world_seed)
    B, names = _read_matrix(args.background)
    expl = brute_force_shapley(model, B, _instance(args), feature_names=names)
    _emit(expl, {k: v for k, v in sorted(vars(args).items()) if k != "func"})
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.jobs is not None:
        cfg = dataclasses.replace(cfg, n_jobs=args.jobs)
    out = args.out or cfg.output_dir
    if not out:
        raise _UsageError("experiment synthetic: --out is required when the config has no output_dir")
    result = run_synthetic_experiment(cfg)
    write_results(result, out)
    if args.verbose:
        print(summarize(result), file=sys.stderr)
    return EXIT_OK


def cmd_fit_pca(args) -> int:
    X, _ = _read_matrix(args.data)
    fit_pca(X, args.retained).save(args.out)
    return EXIT_OK


def cmd_export_world(args) -> int:
    w = _world(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "train.csv", w.X_train)
    write_csv(out / "test.csv", w.X_test)
    (out / "model.json").write_text(json.dumps(w.model.to_dict(), indent=2) + "\n")
    w.pca.save(out / "pca.json")
    return EXIT_OK


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True,
                   help="builtin:synthetic, logistic:MODEL.json or 'external:CMD ARGS'")
    p.add_argument("--background", required=True, help="CSV of background rows")
    p.add_argument("--instance", required=True, help="CSV holding the row to explain")
    p.add_argument("--row", type=int, default=0, help="which row of --instance to explain")
    p.add_argument("--timeout", type=float, default=60.0, help="seconds per external call")
    p.add_argument("--world-seed", type=int, default=0, help="seed of the builtin synthetic world")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="latentshap", description="Kernel SHAP and Latent SHAP explanations.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    explain = sub.add_parser("explain", help="explain one instance")
    esub = explain.add_subparsers(dest="method", required=True, parser_class=_Parser)
    for method in ("kernel", "latent", "naive"):
        p = esub.add_parser(method)
        _model_args(p)
        p.add_argument("--budget", type=int, default=None, help="coalition budget (exhaustive if absent)")
        p.add_argument("--kernel", choices=["standard", "marginal"], default="standard")
        p.add_argument("--seed", type=int, default=0)
        if method != "latent":
            p.add_argument("--ridge", action="store_true", help="add a 1e-10 ridge to the regression")
        if method != "kernel":
            p.add_argument("--transform", required=True,
                           help="PCA JSON, builtin:synthetic-pca or 'external:CMD ARGS'")
        if method == "naive":
            p.add_argument("--linear-only", action="store_true", help="drop the transform's offset")
        if method == "latent":
            p.add_argument("--weighting", choices=["softmax", "normalized"], default="softmax")
            p.add_argument("--distance", choices=["l2", "cosine"], default="l2")
            p.add_argument("--bandwidth", type=float, default=None, help="explicit sigma")
            p.add_argument("--global-bandwidth", action="store_true")
            p.add_argument("--input-budget", type=int, default=None)
        p.set_defaults(func=cmd_explain)

    p = sub.add_parser("oracle", help="exact Shapley values by enumeration (at most 15 features)")
    _model_args(p)
    p.set_defaults(func=cmd_oracle)

    exp = sub.add_parser("experiment", help="fidelity benchmark")
    xsub = exp.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    p = xsub.add_parser("synthetic")
    p.add_argument("--config", help="experiment JSON (defaults apply when absent)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, default=None, help="worker processes")
    p.set_defaults(func=cmd_experiment)
    p = xsub.add_parser("export-world", help="write the synthetic data, classifier and PCA")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_world)

    tr = sub.add_parser("transform", help="transform utilities")
    tsub = tr.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    p = tsub.add_parser("fit-pca")
    p.add_argument("--data", required=True)
    p.add_argument("--retained", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_pca)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except ExternalModelError as e:
        print(f"external model error: {' '.join(str(e).split())}", file=sys.stderr)
        return EXIT_EXTERNAL
    except (LatentShapError, OSError) as e:
        print(f"error: {' '.join(str(e).split())}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
