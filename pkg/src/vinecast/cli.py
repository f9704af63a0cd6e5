"""Command-line front end.

Subcommands: ingest, select-structure, transform, fit, forecast,
backtest, evaluate, frontier.  All randomness flows from the single
``--seed`` flag; outputs are bitwise reproducible for identical config,
seed and inputs, independent of ``--jobs``.  Exit code 1 signals a
module error, 2 a config or data-format violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, dataio
from .errors import ConfigError, DataFormatError, VinecastError
from .evaluation import (
    LossPanel,
    expost_frontier,
    frobenius_losses,
    mcs,
    min_variance_weights,
    rmse_frobenius,
)
from .forecast_engine import (
    MarginLadder,
    PipelineConfig,
    TransformConfig,
    WindowConfig,
    derive_seed,
    run_backtest,
    select_structure,
    step_s1,
    step_s2_fit,
    step_s3_forecast,
    window_schedule,
)
from .margins.models import MarginSpec
from .matrix_core import realized_cov, realized_cov_subsampled, split_cov
from .structure_select import AveragingScheme, average_corr, select_structure_mst

DEFAULT_CONFIG = {
    "transform": {"kind": "pcv", "selection": "mst", "weights": "empirical"},
    "margins": {"variances": "arfima+garch(normal)",
                "tree1": "arfima+garch(normal)",
                "tree2_3": "arfima", "tree4_plus": "mean"},
    "dependence": {"mode": "full", "families": "mixed"},
    "n_replications": 1000,
    "bias_correction": {"kind": "off"},
    "window": {"train_days": 502, "test_days": 22, "warmup_days": 22},
}


def _merged_config(path: str | None) -> dict:
    config = json.loads(json.dumps(DEFAULT_CONFIG))
    if path:
        try:
            user = dataio.load_json(path)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for key, value in user.items():
            if key not in config:
                raise ConfigError(f"unknown config key {key!r}")
            if isinstance(value, dict):
                config[key] = {**config[key], **value} if key == "window" else value
            else:
                config[key] = value
    return config


def _parse_transform(cfg: dict, assets: list[str]) -> TransformConfig:
    kind = cfg.get("kind", "pcv")
    if kind == "cholesky":
        order = cfg.get("asset_order", [])
        if order and isinstance(order[0], str):
            try:
                order = [assets.index(a) + 1 for a in order]
            except ValueError as exc:
                raise ConfigError(f"asset_order names unknown: {exc}") from exc
        return TransformConfig(kind="cholesky", asset_order=tuple(order))
    selection = cfg.get("selection", "mst")
    scheme = AveragingScheme(kind=cfg.get("weights", "empirical"),
                             lam=float(cfg.get("lambda", 0.995)))
    fixed = None
    if selection == "fixed":
        fixed = dataio.load_structure(cfg["structure_file"])
    return TransformConfig(kind="pcv", selection=selection, scheme=scheme,
                           fixed_structure=fixed)


def _parse_margins(cfg: dict) -> MarginLadder:
    try:
        if "all" in cfg:
            return MarginLadder.uniform(MarginSpec.parse(cfg["all"]))
        return MarginLadder(
            variances=MarginSpec.parse(cfg["variances"]),
            tree1=MarginSpec.parse(cfg["tree1"]),
            tree2_3=MarginSpec.parse(cfg["tree2_3"]),
            tree4_plus=MarginSpec.parse(cfg["tree4_plus"]),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad margins config: {exc}") from exc


def _parse_pipeline(config: dict, assets: list[str]) -> tuple[PipelineConfig,
                                                              WindowConfig]:
    dep = config["dependence"]
    if dep.get("mode") not in ("independence", "full", "structured"):
        raise ConfigError(f"bad dependence mode {dep.get('mode')!r}")
    bias = config["bias_correction"]
    if bias.get("kind") not in ("off", "level_match"):
        raise ConfigError(f"bad bias_correction kind {bias.get('kind')!r}")
    s_days = int(bias.get("s_days", 264)) if bias["kind"] == "level_match" else None
    pipeline = PipelineConfig(
        transform=_parse_transform(config["transform"], assets),
        margins=_parse_margins(config["margins"]),
        dependence_mode=dep["mode"],
        dependence_families=dep.get("families", "mixed"),
        n_replications=int(config["n_replications"]),
        bias_correction_days=s_days,
    )
    w = config["window"]
    window = WindowConfig(train_days=int(w["train_days"]),
                          test_days=int(w["test_days"]),
                          warmup_days=int(w["warmup_days"]))
    return pipeline, window


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _write_manifest(args, config: dict, inputs: list[str],
                    extra: dict | None = None, name: str = "manifest.json") -> str:
    digests = {p: dataio.file_digest(p) for p in inputs}
    manifest = dataio.build_manifest(config, args.seed, digests, __version__,
                                     extra=extra)
    path = _out_path(args, name)
    dataio.save_json(path, manifest)
    return os.path.basename(path)


def _next_day_label(days: list[str]) -> str:
    try:
        return str(int(days[-1]) + 1)
    except ValueError:
        import datetime

        last = datetime.date.fromisoformat(days[-1])
        return (last + datetime.timedelta(days=1)).isoformat()


# -- commands -----------------------------------------------------------------

def cmd_ingest(args) -> int:
    panel, assets, days, warnings = dataio.read_intraday_panel(args.input)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    series = []
    for t in range(panel.days):
        if args.n_shifts > 1:
            cov = realized_cov_subsampled(panel, args.grid_stride, args.n_shifts,
                                          t, drop_partial_intervals=not
                                          args.keep_partial)
        elif args.grid_stride > 1:
            cov = realized_cov_subsampled(panel, args.grid_stride, 1, t,
                                          drop_partial_intervals=not
                                          args.keep_partial)
        else:
            cov = realized_cov(panel, t)
        series.append(cov)
    manifest = _write_manifest(
        args, {"grid_stride": args.grid_stride, "n_shifts": args.n_shifts,
               "drop_partial_intervals": not args.keep_partial},
        [args.input], name="ingest_manifest.json")
    dataio.write_cov_series(_out_path(args, "realized_cov.csv"), series, assets,
                            days, manifest=manifest)
    return 0


def cmd_select_structure(args) -> int:
    series, assets, days = dataio.read_cov_series(args.input)
    scheme = AveragingScheme(kind=args.weights, lam=args.lam)
    corrs = [split_cov(y)[1] for y in series]
    rbar = average_corr(corrs, scheme)
    structure, audit = select_structure_mst(rbar, with_audit=True)
    config = {"weights": args.weights, "lambda": args.lam}
    manifest = _write_manifest(args, config, [args.input],
                               name="select_manifest.json")
    dataio.save_structure(_out_path(args, "structure.json"), structure,
                          manifest=manifest)
    import csv as _csv

    with open(_out_path(args, "weight_audit.csv"), "w", newline="") as fh:
        fh.write(f"# manifest={manifest}\n")
        writer = _csv.writer(fh)
        writer.writerow(["tree_level", "conditioning", "pair", "weight",
                         "selected"])
        for row in audit:
            cond = ",".join(assets[i - 1] for i in row.conditioning)
            pair = ",".join(assets[i - 1] for i in row.pair)
            writer.writerow([row.tree_level, cond, pair, dataio.fmt(row.weight),
                             int(row.selected)])
    return 0


def _transform_input(args, config):
    series, assets, days = dataio.read_cov_series(args.input)
    transform = _parse_transform(config["transform"], assets)
    structure = None
    if transform.kind == "pcv":
        if args.structure:
            structure = dataio.load_structure(args.structure)
        else:
            structure = select_structure(series, transform,
                                         seed=derive_seed(args.seed, 0, 0))
    return series, assets, days, transform, structure


def cmd_transform(args) -> int:
    config = _merged_config(args.config)
    series, assets, days, transform, structure = _transform_input(args, config)
    components, meta = step_s1(series, transform, structure)
    inputs = [args.input] + ([args.structure] if args.structure else [])
    manifest = _write_manifest(args, config, inputs,
                               name="transform_manifest.json")
    if meta.structure is not None:
        dataio.save_structure(_out_path(args, "structure.json"), meta.structure,
                              manifest=manifest)
    dataio.write_components(_out_path(args, "components.csv"), days,
                            list(meta.component_ids), components,
                            manifest=manifest)
    return 0


def _margin_summary(margin) -> dict:
    fit = margin.base_fit
    out = {"spec": margin.spec.label()}
    if margin.spec.base == "mean":
        out["params"] = {"mean": fit.mean, "residual_sd": fit.residual_sd}
    elif margin.spec.base == "har":
        out["params"] = {"alpha": list(fit.alpha),
                         "residual_sd": fit.residual_sd,
                         "fallback_mean": fit.fallback_mean}
    else:
        out["params"] = {"mu": fit.mu, "d": fit.d, "phi": list(fit.phi),
                         "psi": list(fit.psi), "residual_sd": fit.residual_sd}
    if margin.garch_fit is not None:
        g = margin.garch_fit
        out["garch"] = {"omega": g.omega, "beta1": g.beta1, "beta2": g.beta2,
                        "innovations": g.innovations}
        if g.sged is not None:
            out["garch"]["sged"] = {"nu": g.sged.nu, "xi": g.sged.xi}
    return out


def _fit_model(args, config):
    series, assets, days, transform, structure = _transform_input(args, config)
    window = config["window"]
    warmup = int(window["warmup_days"])
    if len(series) <= warmup + 23:
        raise ConfigError("input series is too short to fit")
    pipeline, _ = _parse_pipeline(config, assets)
    components, meta = step_s1(series, transform, structure)
    fitted = step_s2_fit(components, meta, pipeline,
                         align_tail=len(series) - warmup)
    return series, assets, days, pipeline, fitted


def cmd_fit(args) -> int:
    config = _merged_config(args.config)
    inputs = [args.input] + ([args.structure] if args.structure else [])
    series, assets, days, pipeline, fitted = _fit_model(args, config)
    manifest = _write_manifest(args, config, inputs, name="fit_manifest.json")
    model = {
        "manifest": manifest,
        "component_ids": list(fitted.meta.component_ids),
        "margins": [_margin_summary(m) for m in fitted.margins],
        "copula": fitted.copula.to_dict(),
    }
    if fitted.meta.structure is not None:
        model["structure"] = fitted.meta.structure.to_dict()
    dataio.save_json(_out_path(args, "model.json"), model)
    return 0


def cmd_forecast(args) -> int:
    config = _merged_config(args.config)
    inputs = [args.input] + ([args.structure] if args.structure else [])
    series, assets, days, pipeline, fitted = _fit_model(args, config)
    record = step_s3_forecast(fitted, pipeline.n_replications,
                              seed=derive_seed(args.seed, 0, 1),
                              day=len(series), window=0,
                              seed_key=(args.seed, 0, 1))
    manifest = _write_manifest(args, config, inputs,
                               name="forecast_manifest.json")
    dataio.write_cov_series(_out_path(args, "forecast.csv"), [record.predicted],
                            assets, [_next_day_label(days)], manifest=manifest)
    return 0


def cmd_backtest(args) -> int:
    config = _merged_config(args.config)
    series, assets, days = dataio.read_cov_series(args.input)
    pipeline, window = _parse_pipeline(config, assets)
    records = run_backtest(series, pipeline, window, root_seed=args.seed,
                           jobs=args.jobs)
    plans = window_schedule(len(series), window)
    structures = []
    if pipeline.transform.kind == "pcv":
        for plan in plans:
            train = series[plan.fit_end - window.train_days:plan.fit_end]
            structure = select_structure(
                train, pipeline.transform,
                seed=derive_seed(args.seed, plan.index, 0))
            structures.append({"window": plan.index,
                               "structure": structure.to_dict()})
    truncated = plans[-1].test_end - plans[-1].test_start < window.test_days
    manifest = _write_manifest(
        args, config, [args.input],
        extra={"windows": structures, "n_windows": len(plans),
               "n_forecasts": len(records),
               "final_window_truncated": truncated},
        name="backtest_manifest.json")
    fdays = [days[r.day] for r in records]
    dataio.write_cov_series(_out_path(args, "forecasts.csv"),
                            [r.predicted for r in records], assets, fdays,
                            manifest=manifest)
    if pipeline.bias_correction_days is not None:
        kept = [(days[r.day], r.predicted_bc) for r in records
                if r.predicted_bc is not None]
        dataio.write_cov_series(_out_path(args, "forecasts_bc.csv"),
                                [m for _, m in kept], assets,
                                [d for d, _ in kept], manifest=manifest)
    return 0


def cmd_evaluate(args) -> int:
    actual_series, assets, actual_days = dataio.read_cov_series(args.actual)
    day_pos = {d: t for t, d in enumerate(actual_days)}
    models, losses, day_sets = [], [], []
    per_model = {}
    for item in args.forecast:
        if "=" not in item:
            raise ConfigError("--forecast expects NAME=path")
        name, _, path = item.partition("=")
        fc, f_assets, f_days = dataio.read_cov_series(path)
        if f_assets != assets:
            raise ConfigError(f"model {name}: asset names differ from actuals")
        missing = [d for d in f_days if d not in day_pos]
        if missing:
            raise ConfigError(f"model {name}: days {missing[:3]} not in actuals")
        models.append(name)
        per_model[name] = (fc, f_days)
        day_sets.append(tuple(f_days))
    if len(set(day_sets)) != 1:
        raise ConfigError("all forecast files must cover the same days")
    eval_days = list(day_sets[0])
    actual_sub = [actual_series[day_pos[d]] for d in eval_days]
    loss_cols, rmses = [], {}
    for name in models:
        fc, _ = per_model[name]
        loss_cols.append(frobenius_losses(fc, actual_sub))
        rmses[name] = rmse_frobenius(fc, actual_sub)
    panel = LossPanel(models=tuple(models), losses=np.column_stack(loss_cols))
    result = mcs(panel, alpha=args.alpha, block_len=args.block_len,
                 n_boot=args.n_boot, seed=derive_seed(args.seed, 99))
    manifest = _write_manifest(
        args, {"alpha": args.alpha, "block_len": args.block_len,
               "n_boot": args.n_boot},
        [args.actual] + [i.partition("=")[2] for i in args.forecast],
        name="evaluate_manifest.json")
    import csv as _csv

    with open(_out_path(args, "rmse_frobenius.csv"), "w", newline="") as fh:
        fh.write(f"# manifest={manifest}\n")
        writer = _csv.writer(fh)
        writer.writerow(["model", "rmse", "in_mcs"])
        for name in models:
            writer.writerow([name, dataio.fmt(rmses[name]),
                             int(name in result.superior)])
    with open(_out_path(args, "rmse_components.csv"), "w", newline="") as fh:
        fh.write(f"# manifest={manifest}\n")
        writer = _csv.writer(fh)
        writer.writerow(["component", "model", "rmse", "in_mcs"])
        d = len(assets)
        for i in range(d):
            for j in range(i, d):
                errors = {}
                for name in models:
                    fc, _ = per_model[name]
                    errors[name] = np.array([f.values[i, j] - a.values[i, j]
                                             for f, a in zip(fc, actual_sub)])
                comp_panel = LossPanel(
                    models=tuple(models),
                    losses=np.column_stack([errors[n] ** 2 for n in models]))
                comp_mcs = mcs(comp_panel, alpha=args.alpha,
                               block_len=args.block_len, n_boot=args.n_boot,
                               seed=derive_seed(args.seed, 100, i, j))
                for name in models:
                    rmse_val = float(np.sqrt(np.mean(errors[name] ** 2)))
                    writer.writerow([f"{assets[i]},{assets[j]}", name,
                                     dataio.fmt(rmse_val),
                                     int(name in comp_mcs.superior)])
    dataio.save_json(_out_path(args, "mcs.json"), {
        "manifest": manifest, "superior": list(result.superior),
        "eliminated": list(result.eliminated), "pvalues": list(result.pvalues),
    })
    return 0


def cmd_frontier(args) -> int:
    forecasts, assets, f_days = dataio.read_cov_series(args.forecast)
    actuals, a_assets, a_days = dataio.read_cov_series(args.actual)
    returns, r_assets, r_days = dataio.read_returns(args.returns)
    if a_assets != assets or r_assets != assets:
        raise ConfigError("assets differ between forecasts, actuals and returns")
    a_pos = {d: t for t, d in enumerate(a_days)}
    r_pos = {d: t for t, d in enumerate(r_days)}
    for d in f_days:
        if d not in a_pos or d not in r_pos:
            raise ConfigError(f"forecast day {d} missing in actuals or returns")
    targets = np.array([float(x) for x in args.targets.split(",")])
    mean_window = args.mean_window
    weights = np.zeros((len(targets), len(f_days), len(assets)))
    expected_sd = np.zeros((len(targets), len(f_days)))
    for t, day in enumerate(f_days):
        rt = r_pos[day]
        if rt < mean_window:
            raise ConfigError(f"not enough return history before day {day}")
        mu_hat = returns[rt - mean_window:rt].mean(axis=0)
        for g, tgt in enumerate(targets):
            w = min_variance_weights(forecasts[t], mu_hat, float(tgt))
            weights[g, t] = w
            expected_sd[g, t] = np.sqrt(w @ forecasts[t].values @ w)
    manifest = _write_manifest(
        args, {"targets": list(map(float, targets)),
               "mean_window": mean_window},
        [args.forecast, args.actual, args.returns],
        name="frontier_manifest.json")
    import csv as _csv

    with open(_out_path(args, "frontier_expected.csv"), "w", newline="") as fh:
        fh.write(f"# manifest={manifest}\n")
        writer = _csv.writer(fh)
        writer.writerow(["target_return", "expected_sd"])
        for g, tgt in enumerate(targets):
            writer.writerow([dataio.fmt(tgt), dataio.fmt(expected_sd[g].mean())])
    with open(_out_path(args, "frontier_expost.csv"), "w", newline="") as fh:
        fh.write(f"# manifest={manifest}\n")
        writer = _csv.writer(fh)
        writer.writerow(["target_return", "avg_realized_return",
                         "avg_realized_sd"])
        actual_sub = [actuals[a_pos[d]] for d in f_days]
        realized = np.array([returns[r_pos[d]] for d in f_days])
        for g, tgt in enumerate(targets):
            stats = expost_frontier(weights[g], realized, actual_sub)
            writer.writerow([dataio.fmt(tgt),
                             dataio.fmt(stats["annualized_return"]),
                             dataio.fmt(stats["annualized_sd"])])
    return 0


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vinecast",
        description="Model and forecast realized covariance matrices through "
                    "partial-correlation-vine data transformation.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=0, help="root seed")
        p.add_argument("--jobs", type=int, default=1, help="worker count")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("ingest", help="intraday returns -> realized covariances")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--grid-stride", type=int, default=1)
    p.add_argument("--n-shifts", type=int, default=1)
    p.add_argument("--keep-partial", action="store_true",
                   help="keep partial head/tail intervals on shifted grids")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("select-structure", help="average-correlation MST vine")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--weights", choices=["empirical", "ewma"],
                   default="empirical")
    p.add_argument("--lambda", dest="lam", type=float, default=0.995)
    p.set_defaults(func=cmd_select_structure)

    for name, func, extra_help in [
            ("transform", cmd_transform, "apply step (S1)"),
            ("fit", cmd_fit, "fit margins and copula on the full series"),
            ("forecast", cmd_forecast, "fit, then forecast the next day")]:
        p = sub.add_parser(name, help=extra_help)
        common(p)
        p.add_argument("--input", required=True)
        p.add_argument("--structure", default=None,
                       help="fixed structure JSON (pcv path)")
        p.set_defaults(func=func)

    p = sub.add_parser("backtest", help="moving-window S1-S3 forecasts")
    common(p)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("evaluate", help="RMSE tables and model confidence set")
    common(p)
    p.add_argument("--actual", required=True)
    p.add_argument("--forecast", action="append", required=True,
                   metavar="NAME=path")
    p.add_argument("--alpha", type=float, default=0.10)
    p.add_argument("--block-len", type=float, default=22.0)
    p.add_argument("--n-boot", type=int, default=2000)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("frontier", help="expected and ex-post frontiers")
    common(p)
    p.add_argument("--forecast", required=True)
    p.add_argument("--actual", required=True)
    p.add_argument("--returns", required=True)
    p.add_argument("--targets", default="0.0001,0.0003,0.0005,0.0007")
    p.add_argument("--mean-window", type=int, default=502)
    p.set_defaults(func=cmd_frontier)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataFormatError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except VinecastError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
