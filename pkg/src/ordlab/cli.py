"""Config-driven command-line front end.

Subcommands
-----------
weights    analytic slope/contrast weight totals for a preset
table      ratio table over a (delta, categories) grid -> CSV
simulate   draw a dataset -> CSV (latent columns behind --with-latent)
estimate   the illustrative-example regression columns -> JSON
diagnose   analytic diagnostics for a preset at a treatment size -> JSON
reproduce  ratio CSV + per-profile gap data + population-size sweep

Every stochastic command requires --seed. All randomness flows from that one
root seed through named stream derivation, so outputs are byte-identical for
any --jobs value. A manifest.json with inputs, seed, package versions and
wall time is written beside the outputs of file-producing commands.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import ConfigError, OrdlabError
from .rng import derive_rng
from .simulate import (
    DgpSpec,
    IllustrativeSpec,
    PRESET_NAMES,
    TABLE_CATEGORY_GRID,
    TABLE_DELTA_GRID,
    build_illustrative,
    draw,
    preset,
    reporting_mixture,
    reproduce_figure,
    spec_from_json,
)
from .weights import discrete_total, mean_slope_total, ratio_table, write_ratio_csv
from . import diagnose as diag
from . import estimate as est


def _default_jobs() -> int:
    env = os.environ.get("ORDLAB_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"ORDLAB_JOBS must be an integer, got {env!r}") from exc
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ordlab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output=True):
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--preset", type=str, default=None, choices=list(PRESET_NAMES))
        if output:
            p.add_argument("-o", "--out", type=str, default=".", help="output directory")

    p = sub.add_parser("weights", help="analytic weight totals for a preset")
    common(p)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--categories", type=int, default=None, help="response categories")

    p = sub.add_parser("table", help="ratio table over (delta, categories)")
    common(p)
    p.add_argument("--delta-grid", type=float, nargs="+", default=None)
    p.add_argument("--categories-grid", type=int, nargs="+", default=None)

    p = sub.add_parser("simulate", help="draw a dataset")
    common(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--with-latent", action="store_true")
    p.add_argument("--treated", action="store_true")

    p = sub.add_parser("estimate", help="illustrative-example regression columns")
    common(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--bootstrap", type=int, default=None, help="replicates for ratio SEs")

    p = sub.add_parser("diagnose", help="analytic diagnostics for a preset")
    common(p)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--categories", type=int, default=None)
    p.add_argument("--n", type=int, default=0, help="also run empirical dominance at this n")

    p = sub.add_parser("reproduce", help="regenerate tables for a figure preset")
    common(p)
    p.add_argument("--figure", type=str, default=None, help="preset name of the figure")
    p.add_argument("--delta-grid", type=float, nargs="+", default=None)
    p.add_argument("--categories-grid", type=int, nargs="+", default=None)
    return parser


def _load_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    return cfg


def _resolve_spec(args, cfg):
    if "spec" in cfg:
        return spec_from_json(cfg["spec"])
    name = args.preset or cfg.get("preset")
    if not name:
        raise ConfigError("a --preset name or config spec is required")
    rho = getattr(args, "rho", None)
    if rho is None:
        rho = cfg.get("rho", 0.0)
    return preset(name, rho=rho)


def _require_seed(args, cfg) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise ConfigError("--seed is required for stochastic commands")
    return int(seed)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _write_manifest(out_dir, command, config, seed, outputs, started) -> str:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "ordlab": __version__,
        },
        "wall_time_s": time.time() - started,
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    path = os.path.join(out_dir, "manifest.json")
    _write_json(path, manifest)
    return path


def _cmd_weights(args, cfg, seed, jobs, out_dir, started):
    spec = _resolve_spec(args, cfg)
    if isinstance(spec, IllustrativeSpec):
        raise ConfigError("weights command needs a scale preset, not an illustrative one")
    categories = args.categories or cfg.get("categories") or spec.categories
    delta = args.delta if args.delta is not None else cfg.get("delta", 1.0)
    mixture = reporting_mixture(spec, categories=categories, rng=derive_rng(seed, "mixture", categories))
    w_x = mean_slope_total(mixture, spec.latent_at_base)
    w_xp = mean_slope_total(mixture, spec.latent_at_base.shift(delta))
    w_xxp = discrete_total(mixture, spec.latent_at_base, delta)
    result = {
        "preset": args.preset or cfg.get("preset"),
        "delta": delta,
        "categories": categories,
        "w_x": w_x.w_total,
        "w_xp": w_xp.w_total,
        "w_xxp": w_xxp.w_total,
        "ratio": w_xxp.w_total / (0.5 * (w_x.w_total + w_xp.w_total)),
    }
    path = os.path.join(out_dir, "weights.json")
    _write_json(path, result)
    return [path]


def _cmd_table(args, cfg, seed, jobs, out_dir, started):
    name = args.preset or cfg.get("preset")
    if not name:
        raise ConfigError("table command requires --preset")
    dgrid = args.delta_grid or cfg.get("delta_grid") or TABLE_DELTA_GRID
    cgrid = args.categories_grid or cfg.get("categories_grid") or TABLE_CATEGORY_GRID
    rows = ratio_table(name, dgrid, cgrid, seed=seed, jobs=jobs)
    path = os.path.join(out_dir, f"{name}_ratio.csv")
    write_ratio_csv(rows, path)
    return [path]


def _cmd_simulate(args, cfg, seed, jobs, out_dir, started):
    spec = _resolve_spec(args, cfg)
    n = args.n or cfg.get("n", 1000)
    data = draw(spec, n, seed=seed, treated=bool(getattr(args, "treated", False)))
    path = os.path.join(out_dir, "dataset.csv")
    data.to_csv(path, with_latent=bool(args.with_latent or cfg.get("with_latent")))
    return [path]


def estimate_columns(rho: float, n: int, seed: int, bootstrap_reps: int = 0, jobs: int = 1,
                     scale: str = "binary") -> dict:
    """The illustrative example's regression columns for one simulated draw."""
    data = build_illustrative(rho, scale, n, seed)
    data = data.with_column("ln_x1", np.log(data.column("x1")))

    ols_log = est.ols(data, "R", ["ln_x1", "x2"]).ratio("x2", "ln_x1")
    ols_income = est.ols(data, "R", ["x1", "x2"])
    conv = ols_income.coefficients["x1"] * float(np.mean(1.0 / data.column("x1")))
    income_ratio = ols_income.coefficients["x2"] / conv if conv != 0 else float("nan")
    ols_h = est.ols(data, "H", ["ln_x1", "x2"]).ratio("x2", "ln_x1")

    fit = est.npreg_fit(data, "R", ["ln_x1"], ["x2"])
    summary = est.nonparametric_summary(fit, "ln_x1", "x2", 1, 0)

    out = {
        "n": n,
        "rho": rho,
        "seed": seed,
        "ols_log": ols_log.to_json(),
        "ols_income": {
            **ols_income.to_json(),
            "log_income_equivalent": conv,
            "ratio": {"numerator": "x2", "denominator": "log_income_equivalent",
                      "value": income_ratio, "ratio_se": float("nan")},
        },
        "ols_infeasible_h": ols_h.to_json(),
        "nonparametric": {
            "avg_marginal_effect_ln_x1": summary.avg_slope,
            "avg_contrast_x2": summary.avg_contrast,
            "ratio": {"numerator": "x2", "denominator": "ln_x1",
                      "value": summary.local_ratio, "ratio_se": float("nan")},
            "dropped_rows": summary.dropped_rows,
            "cv_objective": fit.cv_objective,
            "bandwidths": fit.bandwidths.tolist(),
            "lambdas": fit.lambdas.tolist(),
        },
    }
    if bootstrap_reps > 0:
        def ols_ratio_stat(d):
            d = d.with_column("ln_x1", np.log(d.column("x1")))
            res = est.ols(d, "R", ["ln_x1", "x2"])
            return res.coefficients["x2"] / res.coefficients["ln_x1"]

        boot = est.bootstrap(ols_ratio_stat, data, b=bootstrap_reps, seed=seed, jobs=jobs)
        out["ols_log"]["ratio"]["ratio_se"] = boot.se

        def np_ratio_stat(d):
            bfit = est.CefFit(
                np.asarray(d.column("R"), float),
                np.log(np.asarray(d.column("x1"), float))[:, None],
                np.asarray(d.column("x2"), float)[:, None],
                ("ln_x1",), ("x2",), fit.bandwidths, fit.lambdas, fit.cv_objective,
            )
            return est.nonparametric_summary(bfit, "ln_x1", "x2", 1, 0).local_ratio

        boot_np = est.bootstrap(np_ratio_stat, data, b=bootstrap_reps, seed=seed, jobs=jobs)
        out["nonparametric"]["ratio"]["ratio_se"] = boot_np.se
    return out


def _cmd_estimate(args, cfg, seed, jobs, out_dir, started):
    rho = args.rho if args.rho is not None else cfg.get("rho", 0.0)
    n = args.n or cfg.get("n", 10000)
    reps = args.bootstrap if args.bootstrap is not None else cfg.get("bootstrap", 0)
    name = args.preset or cfg.get("preset") or "illustrative_binary"
    spec = preset(name, rho=rho)
    if not isinstance(spec, IllustrativeSpec):
        raise ConfigError("estimate command needs an illustrative preset")
    result = estimate_columns(spec.rho, n, seed, bootstrap_reps=reps, jobs=jobs,
                              scale=spec.scale)
    path = os.path.join(out_dir, "estimate.json")
    _write_json(path, result)
    return [path]


def _cmd_diagnose(args, cfg, seed, jobs, out_dir, started):
    spec = _resolve_spec(args, cfg)
    if isinstance(spec, IllustrativeSpec):
        raise ConfigError("diagnose command needs a scale preset")
    categories = args.categories or cfg.get("categories") or spec.categories
    delta = args.delta if args.delta is not None else cfg.get("delta", 0.5)
    mixture = reporting_mixture(spec, categories=categories, rng=derive_rng(seed, "mixture", categories))
    dist = spec.latent_at_base
    result = {
        "preset": args.preset or cfg.get("preset"),
        "delta": delta,
        "categories": categories,
        "quantile_expansion": diag.quantile_expansion_check(dist, dist.shift(delta), mixture),
        "dominance_analytic": diag.dominance_check(dist, dist.shift(delta), mixture),
    }
    n = args.n or cfg.get("n", 0)
    if n:
        import dataclasses

        from .simulate import draw_pair

        spec_n = dataclasses.replace(spec, delta_spec=float(delta), categories=int(categories))
        base, treated = draw_pair(spec_n, n, seed=seed)
        result["dominance_empirical"] = diag.dominance_check(treated, base)
    path = os.path.join(out_dir, "diagnose.json")
    _write_json(path, result)
    return [path]


def _cmd_reproduce(args, cfg, seed, jobs, out_dir, started):
    name = args.figure or args.preset or cfg.get("figure") or cfg.get("preset")
    if not name:
        raise ConfigError("reproduce requires --figure NAME")
    dgrid = args.delta_grid or cfg.get("delta_grid")
    cgrid = args.categories_grid or cfg.get("categories_grid")
    return reproduce_figure(name, out_dir, seed=seed, delta_grid=dgrid,
                            categories_grid=cgrid, jobs=jobs)


_COMMANDS = {
    "weights": _cmd_weights,
    "table": _cmd_table,
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "diagnose": _cmd_diagnose,
    "reproduce": _cmd_reproduce,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    try:
        cfg = _load_config(args)
        seed = _require_seed(args, cfg)
        jobs = args.jobs if args.jobs is not None else cfg.get("jobs", _default_jobs())
        if jobs < 1:
            raise ConfigError("jobs must be at least 1")
        out_dir = getattr(args, "out", ".")
        os.makedirs(out_dir, exist_ok=True)
        outputs = _COMMANDS[args.command](args, cfg, seed, jobs, out_dir, started)
        _write_manifest(out_dir, args.command, cfg or vars(args), seed, outputs, started)
    except ConfigError as exc:
        json.dump({"error": {"kind": "config", "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except OrdlabError as exc:
        json.dump(
            {"error": {"kind": "numerical", "operation": args.command, "message": str(exc)}},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 3
    for p in outputs:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
