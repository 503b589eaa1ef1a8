"""Command-line surface: ingest, train, attribute, forecast, report.

Exit codes: 0 success, 1 usage, 2 data validation, 3 numerical failure,
4 capability guard. Every output file embeds the resolved config hash and
seed (CSV comment lines, JSON fields), and reruns with identical inputs
and seed are byte-identical.
"""

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from ._backend import active_backend
from .arima import ArimaOrder, fit, forecast, select_order
from .attribution import summarize
from .config import RunConfig, load_config
from .errors import (CapabilityError, DataError, DomainError, EstimationError,
                     KscaleError)
from .forest import Hyperparams, evaluate, fit_forest, load_model, save_model
from .ingest import (assemble_matrix, load_panel, load_ratio, load_scenario)
from .pipeline import (SSP_ORDER, FusionScenario, fusion_extrapolate,
                       project_global)
from .timeseries import acf, pacf
from .units import (AnnualEnergy, KardashevIndex, PowerWatts, YearConvention,
                    annual_energy_from_power, k_from_power,
                    power_from_annual_energy, power_from_k)

REFERENCE_METRICS = {
    "r2": 0.991,
    "rmse": 1.05,
    "note": ("benchmark values from the original full-data study; "
             "the bundled sample data is synthetic and cannot reproduce them"),
}


def _meta(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.config_hash(), "seed": cfg.seed,
            "kscale_version": __version__, "backend": active_backend()}


def _write_csv(path: Path, header, rows, meta: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key, value in sorted(meta.items()):
            fh.write(f"# {key}={value}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _fmt(x: float) -> str:
    return repr(float(x))


_config_option = click.option("--config", "config_path", type=click.Path(), default=None,
                              help="JSON config file; flags override its values.")
_seed_option = click.option("--seed", type=int, default=None, help="Master seed.")
_out_option = click.option("--out", type=click.Path(), default=None,
                           help="Output directory (default: ./out).")
_json_option = click.option("--json", "as_json", is_flag=True,
                            help="Machine-readable JSON to stdout.")
_convention_option = click.option("--year-convention",
                                  type=click.Choice(["civil365", "julian"]),
                                  default=None, help="Seconds-per-year convention.")


@click.group()
@click.version_option(__version__, prog_name="kscale")
def cli():
    """Energy-consumption forecasting and Kardashev-index projection."""


@cli.command()
@_config_option
@click.option("--panel", type=click.Path(), default=None)
@click.option("--scenario", type=click.Path(), default=None)
@click.option("--ratio", type=click.Path(), default=None)
@_json_option
def validate(config_path, panel, scenario, ratio, as_json):
    """Check the three input files against their schemas."""
    cfg = load_config(config_path, {"panel": panel, "scenario": scenario,
                                    "ratio": ratio})
    loaders = [("panel", cfg.panel, load_panel),
               ("scenario", cfg.scenario, load_scenario),
               ("ratio", cfg.ratio, load_ratio)]
    report = []
    ok = True
    for name, path, loader in loaders:
        try:
            loaded = loader(path)
            n = len(loaded) if isinstance(loaded, list) else len(loaded.series)
            report.append({"file": str(path), "kind": name, "status": "ok", "rows": n})
        except DataError as exc:
            ok = False
            report.append({"file": str(path), "kind": name, "status": "fail",
                           "error": str(exc)})
    if as_json:
        click.echo(json.dumps({"ok": ok, "files": report}, sort_keys=True))
    else:
        for item in report:
            if item["status"] == "ok":
                click.echo(f"{item['kind']:9s} {item['file']}: OK ({item['rows']} rows)")
            else:
                click.echo(f"{item['kind']:9s} {item['file']}: FAIL - {item['error']}")
    if not ok:
        raise DataError("validation failed")


def _hyper(cfg: RunConfig) -> Hyperparams:
    return Hyperparams(n_trees=cfg.trees, mtry=cfg.mtry, min_leaf=cfg.min_leaf,
                       max_depth=cfg.max_depth, seed=cfg.seed)


def _train_model(cfg: RunConfig):
    records = load_panel(cfg.panel)
    X, y, names = assemble_matrix(records)
    n = X.shape[0]
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_holdout = max(1, int(round(n * cfg.holdout)))
    test_idx = perm[:n_holdout]
    train_idx = perm[n_holdout:]
    model = fit_forest(X[train_idx], y[train_idx], _hyper(cfg),
                       feature_names=names, jobs=cfg.jobs)
    metrics = evaluate(model, X[test_idx], y[test_idx])
    return records, X, y, model, metrics


@cli.command()
@_config_option
@click.option("--panel", type=click.Path(), default=None)
@_seed_option
@_out_option
@click.option("--trees", type=int, default=None, help="Number of trees (default 500).")
@click.option("--mtry", type=int, default=None, help="Features per split (default ceil(p/3)).")
@click.option("--min-leaf", type=int, default=None)
@click.option("--max-depth", type=int, default=None)
@click.option("--holdout", type=float, default=None, help="Validation fraction (default 0.2).")
@click.option("--jobs", type=int, default=None, help="Parallel tree-building threads.")
@_json_option
def train(config_path, panel, seed, out, trees, mtry, min_leaf, max_depth,
          holdout, jobs, as_json):
    """Train the forest on the panel with a seeded 80/20 validation split."""
    cfg = load_config(config_path, {"panel": panel, "seed": seed, "out": out,
                                    "trees": trees, "mtry": mtry,
                                    "min_leaf": min_leaf, "max_depth": max_depth,
                                    "holdout": holdout, "jobs": jobs})
    if not 0.0 < cfg.holdout < 1.0:
        raise click.UsageError(f"holdout must lie in (0, 1), got {cfg.holdout}")
    try:
        _, _, _, model, metrics = _train_model(cfg)
    except DataError:
        raise
    except KscaleError as exc:
        raise EstimationError(f"training failed: {exc}") from exc
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = out_dir / "model.json"
    save_model(model, model_path)
    doc = {"metrics": {"r2": metrics.r2, "rmse_ej": metrics.rmse,
                       "oob_rmse_ej": model.oob_rmse},
           "reference_metrics": REFERENCE_METRICS,
           "model_file": str(model_path),
           "n_trees": model.hyper.n_trees, "mtry": model.hyper.mtry,
           **_meta(cfg)}
    _write_json(out_dir / "train_metrics.json", doc)
    if as_json:
        click.echo(json.dumps(doc, sort_keys=True))
    else:
        click.echo(f"validation R^2  {metrics.r2:.4f}")
        click.echo(f"validation RMSE {metrics.rmse:.4f} EJ")
        click.echo(f"OOB RMSE        {model.oob_rmse:.4f} EJ")
        click.echo(f"reference (full-data study): R^2={REFERENCE_METRICS['r2']}, "
                   f"RMSE={REFERENCE_METRICS['rmse']}")
        click.echo(f"model written to {model_path}")


@cli.command(name="shap")
@_config_option
@click.option("--panel", type=click.Path(), default=None)
@click.option("--model", "model_path", type=click.Path(), default=None,
              help="Trained model file; trains in-memory when omitted.")
@_seed_option
@_out_option
@click.option("--trees", type=int, default=None,
              help="Tree count for in-memory training (ignored with --model).")
@click.option("--method", type=click.Choice(["fast", "enumeration"]), default="fast",
              help="fast: polynomial traversal; enumeration: exact subset sum.")
@click.option("--max-rows", type=int, default=None,
              help="Attribute a seeded row subsample of this size (default: all rows).")
@_json_option
def shap_cmd(config_path, panel, model_path, seed, out, trees, method, max_rows,
             as_json):
    """Rank drivers by mean |Shapley value| over the panel."""
    cfg = load_config(config_path, {"panel": panel, "seed": seed, "out": out,
                                    "trees": trees})
    records = load_panel(cfg.panel)
    X, y, names = assemble_matrix(records)
    if model_path:
        model = load_model(model_path)
    else:
        model = fit_forest(X, y, _hyper(cfg), feature_names=names, jobs=cfg.jobs)
    if max_rows is not None and 0 < max_rows < X.shape[0]:
        keep = np.sort(np.random.default_rng(cfg.seed).permutation(X.shape[0])[:max_rows])
        X = X[keep]
    ranking = summarize(model, X, method=method)
    out_dir = Path(cfg.out)
    rows = [(name, _fmt(value), rank + 1)
            for rank, (name, value) in enumerate(zip(ranking.features,
                                                     ranking.mean_abs_phi))]
    _write_csv(out_dir / "shap_summary.csv", ("feature", "mean_abs_shap", "rank"),
               rows, {**_meta(cfg), "rows_attributed": X.shape[0],
                      "units": "EJ (same as the prediction target)"})
    if as_json:
        click.echo(json.dumps({"ranking": [
            {"feature": n, "mean_abs_shap": float(v), "rank": i + 1}
            for i, (n, v) in enumerate(zip(ranking.features, ranking.mean_abs_phi))],
            **_meta(cfg)}, sort_keys=True))
    else:
        click.echo("top drivers by mean |SHAP| (EJ):")
        for name, value in ranking.top(3):
            click.echo(f"  {name:20s} {value:.4f}")
        click.echo(f"summary written to {out_dir / 'shap_summary.csv'}")


@cli.command(name="arima")
@_config_option
@click.option("--ratio", type=click.Path(), default=None)
@click.option("--order", "order_text", default=None, metavar="P,D,Q",
              help="Fix the order instead of selecting it.")
@click.option("--p-max", type=int, default=None)
@click.option("--d-max", type=int, default=None)
@click.option("--q-max", type=int, default=None)
@click.option("--horizon", type=int, default=None,
              help="Forecast steps (default: through 2060).")
@_seed_option
@_out_option
@_json_option
def arima_cmd(config_path, ratio, order_text, p_max, d_max, q_max, horizon,
              seed, out, as_json):
    """Fit the ratio series and forecast it with 95% intervals."""
    cfg = load_config(config_path, {"ratio": ratio, "seed": seed, "out": out,
                                    "p_max": p_max, "d_max": d_max, "q_max": q_max})
    series = load_ratio(cfg.ratio).series
    if horizon is None:
        horizon = max(1, 2060 - series.end_year)
    if horizon < 1:
        raise click.UsageError(f"horizon must be >= 1, got {horizon}")
    if order_text:
        try:
            p, d, q = (int(part) for part in order_text.split(","))
            order = ArimaOrder(p, d, q)
        except ValueError as exc:
            raise click.UsageError(f"--order must be P,D,Q: {exc}") from None
    else:
        order = select_order(series, cfg.p_max, cfg.d_max, cfg.q_max)
    fitted = fit(series, order)
    path = forecast(fitted, series, horizon)

    out_dir = Path(cfg.out)
    meta = _meta(cfg)
    years = np.arange(series.end_year + 1, series.end_year + 1 + horizon)
    _write_csv(out_dir / "ratio_forecast.csv",
               ("year", "point", "lower95", "upper95"),
               [(int(yr), _fmt(p_), _fmt(lo), _fmt(hi))
                for yr, p_, lo, hi in zip(years, path.point, path.lower95,
                                          path.upper95)], meta)
    max_lag = min(12, len(series) - 1)
    r = acf(series, max_lag)
    pr = pacf(series, max_lag)
    _write_csv(out_dir / "ratio_identification.csv", ("lag", "acf", "pacf"),
               [(lag, _fmt(r[lag]), _fmt(pr[lag])) for lag in range(max_lag + 1)],
               meta)
    doc = {"order": {"p": order.p, "d": order.d, "q": order.q},
           "intercept": fitted.intercept,
           "ar": list(fitted.ar), "ma": list(fitted.ma),
           "sigma2": fitted.sigma2, "aicc": fitted.aicc,
           "forecast_end": {"year": int(years[-1]), "point": float(path.point[-1])},
           **meta}
    if as_json:
        click.echo(json.dumps(doc, sort_keys=True))
    else:
        click.echo(f"selected order ({order.p},{order.d},{order.q})  "
                   f"AICc {fitted.aicc:.2f}")
        click.echo(f"intercept {fitted.intercept:.6g}  ar {np.round(fitted.ar, 4)}  "
                   f"ma {np.round(fitted.ma, 4)}  sigma2 {fitted.sigma2:.3g}")
        click.echo(f"{years[-1]} point forecast {path.point[-1]:.4f} "
                   f"[{path.lower95[-1]:.4f}, {path.upper95[-1]:.4f}]")
        click.echo(f"forecast written to {out_dir / 'ratio_forecast.csv'}")


@cli.command(name="pipeline")
@_config_option
@click.option("--panel", type=click.Path(), default=None)
@click.option("--scenario", type=click.Path(), default=None)
@click.option("--ratio", type=click.Path(), default=None)
@_seed_option
@_out_option
@_convention_option
@click.option("--trees", type=int, default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--fusion", "with_fusion", is_flag=True,
              help="Also write the two-branch K trajectory to 2100.")
@_json_option
def pipeline_cmd(config_path, panel, scenario, ratio, seed, out, year_convention,
                 trees, jobs, with_fusion, as_json):
    """Full run: train, forecast countries, project ratio, report."""
    cfg = load_config(config_path, {"panel": panel, "scenario": scenario,
                                    "ratio": ratio, "seed": seed, "out": out,
                                    "year_convention": year_convention,
                                    "trees": trees, "jobs": jobs})
    records = load_panel(cfg.panel)
    scenario_rows = load_scenario(cfg.scenario)
    ratio_series = load_ratio(cfg.ratio)
    X, y, names = assemble_matrix(records)
    model = fit_forest(X, y, _hyper(cfg), feature_names=names, jobs=cfg.jobs)

    fusion_cfg = None
    if with_fusion:
        fusion_cfg = FusionScenario(pivot_year=cfg.fusion_pivot_year,
                                    growth_with_fusion=cfg.fusion_growth,
                                    growth_baseline=cfg.baseline_growth,
                                    horizon_year=cfg.fusion_horizon_year)
    result = project_global(model, scenario_rows, ratio_series,
                            arima_bounds=(cfg.p_max, cfg.d_max, cfg.q_max),
                            table_years=cfg.table_years,
                            convention=cfg.convention, fusion=fusion_cfg)

    out_dir = Path(cfg.out)
    meta = _meta(cfg)
    _write_csv(out_dir / "table1.csv",
               ("year", "energy_ssp126_ej", "energy_ssp245_ej",
                "energy_ssp370_ej", "energy_ssp585_ej", "k"),
               [(row.year, *(_fmt(row.energy_ej[s]) for s in SSP_ORDER), _fmt(row.k))
                for row in result.table], meta)
    if result.fusion is not None:
        with_f, baseline = result.fusion
        _write_csv(out_dir / "k_trajectory.csv",
                   ("year", "k_with_fusion", "k_baseline"),
                   [(int(yr), _fmt(kf), _fmt(kb))
                    for yr, kf, kb in zip(with_f.years, with_f.values,
                                          baseline.values)], meta)
    manifest = {
        "inputs": {"panel": str(cfg.panel), "scenario": str(cfg.scenario),
                   "ratio": str(cfg.ratio)},
        "ratio_order": {"p": result.ratio_fit.order.p, "d": result.ratio_fit.order.d,
                        "q": result.ratio_fit.order.q},
        "reference_metrics": REFERENCE_METRICS,
        "outputs": ["table1.csv"] + (["k_trajectory.csv"] if with_fusion else []),
        **meta,
    }
    _write_json(out_dir / "run_manifest.json", manifest)

    final = result.table[-1]
    if as_json:
        click.echo(json.dumps({
            "final_year": final.year,
            "energy_ej": {s.value: final.energy_ej[s] for s in SSP_ORDER},
            "k": final.k, **meta}, sort_keys=True))
    else:
        click.echo(f"{final.year} energy (EJ): " + "  ".join(
            f"{s.value}={final.energy_ej[s]:.2f}" for s in SSP_ORDER))
        click.echo(f"{final.year} K (from SSP126): {final.k:.5f}")
        click.echo(f"outputs written to {out_dir}/")


@cli.command(name="kardashev")
@click.option("--ej", type=float, default=None, help="Annual energy in EJ per year.")
@click.option("--watts", type=float, default=None, help="Mean power in W.")
@click.option("--k", type=float, default=None, help="Kardashev index.")
@_convention_option
@_json_option
def kardashev_cmd(ej, watts, k, year_convention, as_json):
    """Convert between EJ/yr, W and K (give exactly one)."""
    given = [v for v in (ej, watts, k) if v is not None]
    if len(given) != 1:
        raise click.UsageError("give exactly one of --ej, --watts, --k")
    conv = YearConvention.JULIAN if year_convention == "julian" else YearConvention.CIVIL_365
    try:
        if ej is not None:
            energy = AnnualEnergy(ej, conv)
            power = power_from_annual_energy(energy)
            index = k_from_power(power)
        elif watts is not None:
            power = PowerWatts(watts)
            energy = annual_energy_from_power(power, conv)
            index = k_from_power(power)
        else:
            index = KardashevIndex(k)
            power = power_from_k(index)
            energy = annual_energy_from_power(power, conv)
    except DomainError as exc:
        raise click.UsageError(str(exc)) from None
    doc = {"energy_ej_per_year": energy.value, "power_watts": power.value,
           "kardashev_index": index.value, "year_convention": conv.name.lower()}
    if as_json:
        click.echo(json.dumps(doc, sort_keys=True))
    else:
        click.echo(f"energy : {energy.value:.6g} EJ/yr ({conv.name}, "
                   f"{conv.seconds} s/yr)")
        click.echo(f"power  : {power.value:.6g} W")
        click.echo(f"K      : {index.value:.5f}")


@cli.command(name="fusion")
@click.option("--k-pivot", type=float, default=0.7474, show_default=True)
@click.option("--pivot-year", type=int, default=2060, show_default=True)
@click.option("--horizon-year", type=int, default=2100, show_default=True)
@click.option("--growth-fusion", type=float, default=0.01417, show_default=True,
              help="Per-year power growth with fusion.")
@click.option("--growth-baseline", type=float, default=0.00346, show_default=True)
@_out_option
@_json_option
def fusion_cmd(k_pivot, pivot_year, horizon_year, growth_fusion, growth_baseline,
               out, as_json):
    """Extrapolate the two-branch K trajectory from a pivot index."""
    try:
        fs = FusionScenario(pivot_year=pivot_year, k_pivot=KardashevIndex(k_pivot),
                            growth_with_fusion=growth_fusion,
                            growth_baseline=growth_baseline,
                            horizon_year=horizon_year)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    with_f, baseline = fusion_extrapolate(fs)
    out_dir = Path(out or "out")
    meta = {"k_pivot": k_pivot, "pivot_year": pivot_year,
            "growth_fusion": growth_fusion, "growth_baseline": growth_baseline,
            "kscale_version": __version__}
    _write_csv(out_dir / "k_trajectory.csv", ("year", "k_with_fusion", "k_baseline"),
               [(int(yr), _fmt(kf), _fmt(kb))
                for yr, kf, kb in zip(with_f.years, with_f.values, baseline.values)],
               meta)
    doc = {"k_end_with_fusion": float(with_f.values[-1]),
           "k_end_baseline": float(baseline.values[-1]), **meta}
    if as_json:
        click.echo(json.dumps(doc, sort_keys=True))
    else:
        click.echo(f"K({horizon_year}) with fusion: {with_f.values[-1]:.4f}")
        click.echo(f"K({horizon_year}) baseline   : {baseline.values[-1]:.4f}")
        click.echo(f"trajectory written to {out_dir / 'k_trajectory.csv'}")


def main(argv=None) -> int:
    """Entry point with the exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    except CapabilityError as exc:
        click.echo(f"error: {exc}", err=True)
        return 4
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (DomainError, EstimationError, FloatingPointError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
