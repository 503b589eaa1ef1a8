#!/usr/bin/env python3
"""Generate the bundled synthetic sample datasets.

The panel covers 66 synthetic countries (C01..C66) over 1995-2020 with a
strongly GDP-driven energy relation plus mild demographic and climate
effects; the scenario file projects drivers for the 42 largest of them
(C01..C42) to 2060 under the four SSP scenarios, and the ratio file tracks
the share of the 42-country block in world energy, declining roughly
linearly through the historical window.

Climate variables are stored per country: temperature, precipitation,
aerosol and water vapor reflect country geography, while CO2 and CH4 are
near-global values with small spatial offsets.

The scenario GDP growth is calibrated with a secant loop so the default
pipeline projects 2060 SSP126 global energy into the 925-945 EJ band, and
the script asserts the qualitative gates the bundled data must satisfy
(holdout R^2, GDP-led attribution ranking, declining ratio forecast).
Everything is seeded; rerunning reproduces the shipped files byte for byte.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from kscale.arima import fit, forecast, select_order
from kscale.attribution import summarize
from kscale.errors import KscaleError
from kscale.forest import FeatureVector, Hyperparams, evaluate, fit_forest
from kscale.ingest import (DriverScenario, PanelRecord, RatioSeries, Ssp,
                           assemble_matrix, scenario_matrix, write_panel,
                           write_ratio, write_scenario)
from kscale.timeseries import AnnualSeries

BASE_SEED = 20240901
N_COUNTRIES = 66
N_SELECTED = 42
PANEL_YEARS = range(1995, 2021)
SCENARIO_YEARS = range(2021, 2061)
WORLD_2020_EJ = 580.0
RATIO_2020 = 0.773
RATIO_1995 = 0.7993  # drift of ~-0.00105/yr continues to ~0.731 by 2060
TARGET_2060 = 933.0  # middle of the published 928-940 EJ band

SSP_GDP_MULT = {Ssp.SSP126: 1.0020, Ssp.SSP245: 1.0000, Ssp.SSP370: 0.9975,
                Ssp.SSP585: 0.9970}
SSP_WARMING = {Ssp.SSP126: 0.008, Ssp.SSP245: 0.012, Ssp.SSP370: 0.016,
               Ssp.SSP585: 0.019}
SSP_CO2_2060 = {Ssp.SSP126: 445.0, Ssp.SSP245: 520.0, Ssp.SSP370: 590.0,
                Ssp.SSP585: 650.0}
SSP_CH4_2060 = {Ssp.SSP126: 1860.0, Ssp.SSP245: 1980.0, Ssp.SSP370: 2120.0,
                Ssp.SSP585: 2200.0}


def country_profiles(rng):
    """Static per-country characteristics, index 0 = largest economy."""
    n = N_COUNTRIES
    gdp_2020 = np.geomspace(21.5e12, 0.05e12, n)  # constant-2015 USD
    gdp_growth = rng.uniform(0.016, 0.042, n)
    pop_2020 = 6.0e7 * (gdp_2020 / 1e12) ** 0.55 * rng.lognormal(0.0, 0.35, n)
    pop_2020 = np.clip(pop_2020, 8e5, 1.45e9)
    pop_growth = rng.uniform(0.003, 0.016, n)
    urb_2020 = rng.uniform(0.48, 0.92, n)
    urb_rise = rng.uniform(0.002, 0.005, n)
    temp_base = rng.uniform(278.0, 300.0, n)
    precip = rng.uniform(250.0, 2400.0, n)
    aod_2020 = rng.uniform(0.06, 0.45, n)
    return {
        "gdp_2020": gdp_2020, "gdp_growth": gdp_growth,
        "pop_2020": pop_2020, "pop_growth": pop_growth,
        "urb_2020": urb_2020, "urb_rise": urb_rise,
        "temp_base": temp_base, "precip": precip, "aod_2020": aod_2020,
    }


def co2_global(year: float) -> float:
    t = year - 1995
    return 360.6 + 2.05 * t + 0.0085 * t * t


def ch4_global(year: float) -> float:
    return 1730.0 + 3.1 * (year - 1995)


def drivers_for(prof, i, year, rng, ssp=None, gdp_mult=1.0):
    """Driver vector for country i in a given year (historical or scenario)."""
    dt = year - 2020
    growth = prof["gdp_growth"][i] * gdp_mult
    if ssp is not None:
        growth *= SSP_GDP_MULT[ssp]
    gdp = prof["gdp_2020"][i] * (1.0 + growth) ** dt
    pop_g = prof["pop_growth"][i] * (0.55 ** max(0, dt / 20.0))  # demographic slowdown
    pop = prof["pop_2020"][i] * (1.0 + pop_g) ** dt
    urb = min(0.95, prof["urb_2020"][i] + prof["urb_rise"][i] * dt)
    urb = max(0.05, urb)
    if ssp is None:
        temp = prof["temp_base"][i] + 0.008 * (year - 1995) + rng.normal(0.0, 0.45)
        co2 = co2_global(year) + rng.normal(0.0, 0.6)
        ch4 = ch4_global(year) + rng.normal(0.0, 18.0)
    else:
        frac = (year - 2020) / 40.0
        temp = (prof["temp_base"][i] + 0.008 * 25.0
                + SSP_WARMING[ssp] * (year - 2020) + rng.normal(0.0, 0.45))
        co2 = co2_global(2020) + (SSP_CO2_2060[ssp] - co2_global(2020)) * frac \
            + rng.normal(0.0, 0.6)
        ch4 = ch4_global(2020) + (SSP_CH4_2060[ssp] - ch4_global(2020)) * frac \
            + rng.normal(0.0, 18.0)
    precip = prof["precip"][i] * (1.0 + rng.normal(0.0, 0.015))
    aod = max(0.01, prof["aod_2020"][i] * (1.0 - 0.004 * (year - 2020)))
    water = max(2.0, 6.0 + 0.95 * (temp - 278.0) + 0.004 * precip
                + rng.normal(0.0, 0.4))
    return FeatureVector(
        gdp=float(gdp), population=float(pop), urban_population=float(pop * urb),
        urbanization=float(urb), temperature=float(temp),
        precipitation=float(precip), co2=float(co2), ch4=float(ch4),
        aerosol_aod550=float(aod), water_vapor=float(water))


def energy_for(drivers: FeatureVector, scale: float, noise: float) -> float:
    """Energy relation: GDP-dominant with mild demographic/climate effects."""
    gdp_t = drivers.gdp / 1e12
    core = scale * gdp_t ** 0.93
    core *= (drivers.population / 5.0e8) ** 0.10
    core *= 0.80 + 0.40 * drivers.urbanization
    core *= 1.0 + 0.012 * np.tanh((drivers.temperature - 288.0) / 8.0)
    return float(core * noise)


def build_panel(prof, rng, scale):
    records = []
    for i in range(N_COUNTRIES):
        for year in PANEL_YEARS:
            d = drivers_for(prof, i, year, rng)
            noise = float(rng.lognormal(0.0, 0.025))
            records.append(PanelRecord(f"C{i + 1:02d}", year, d,
                                       energy_for(d, scale, noise)))
    return records


def build_scenario(prof, rng, gdp_mult):
    rows = []
    for ssp in (Ssp.SSP126, Ssp.SSP245, Ssp.SSP370, Ssp.SSP585):
        for i in range(N_SELECTED):
            for year in SCENARIO_YEARS:
                d = drivers_for(prof, i, year, rng, ssp=ssp, gdp_mult=gdp_mult)
                rows.append(DriverScenario(ssp, f"C{i + 1:02d}", year, d))
    return rows


def build_ratio(rng):
    years = np.array(list(PANEL_YEARS))
    frac = (2020 - years) / (2020 - years[0])
    values = RATIO_2020 + (RATIO_1995 - RATIO_2020) * frac
    values = values + rng.normal(0.0, 0.00055, years.size)
    values[0] = RATIO_1995
    values[-1] = RATIO_2020
    return RatioSeries(AnnualSeries(int(years[0]), values))


def scale_for_world(prof, rng_seed):
    """Energy scale such that the 42-country 2020 sum matches the ratio share."""
    rng = np.random.default_rng(rng_seed)
    raw = 0.0
    for i in range(N_SELECTED):
        d = drivers_for(prof, i, 2020, rng)
        raw += energy_for(d, 1.0, 1.0)
    return WORLD_2020_EJ * RATIO_2020 / raw


def project_2060(panel, scenario, ratio):
    """2060 SSP126 global energy under the default pipeline settings."""
    X, y, names = assemble_matrix(panel)
    model = fit_forest(X, y, Hyperparams(seed=0), feature_names=names, jobs=4)
    rows126 = [r for r in scenario if r.ssp is Ssp.SSP126 and r.year == 2060]
    preds = model.predict_matrix(scenario_matrix(rows126))
    order = select_order(ratio.series, 3, 2, 3)
    rfit = fit(ratio.series, order)
    path = forecast(rfit, ratio.series, 2060 - ratio.series.end_year)
    ratio_2060 = float(path.point[-1])
    return float(preds.sum()) / ratio_2060, ratio_2060, model, (X, y, names)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent
                                             / "src" / "kscale" / "sample_data"))
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    prof = country_profiles(np.random.default_rng(BASE_SEED))
    scale = scale_for_world(prof, BASE_SEED + 1)
    panel = build_panel(prof, np.random.default_rng(BASE_SEED + 2), scale)
    ratio = build_ratio(np.random.default_rng(BASE_SEED + 3))

    # secant calibration of the scenario GDP-growth multiplier
    mult_lo, mult_hi = 0.6, 1.6
    mult = 1.0
    result = None
    for iteration in range(8):
        scenario = build_scenario(prof, np.random.default_rng(BASE_SEED + 4), mult)
        total, ratio_2060, model, mats = project_2060(panel, scenario, ratio)
        print(f"  calibration {iteration}: mult={mult:.4f} -> 2060 SSP126 "
              f"{total:.1f} EJ (ratio {ratio_2060:.4f})")
        if 925.0 <= total <= 945.0:
            result = (scenario, model, mats, ratio_2060)
            break
        if total > TARGET_2060:
            mult_hi = mult
        else:
            mult_lo = mult
        mult = 0.5 * (mult_lo + mult_hi)
    if result is None:
        raise SystemExit("calibration failed to land in the 925-945 EJ band")
    scenario, model, (X, y, names), ratio_2060 = result

    # qualitative gates the bundled data must satisfy
    rng = np.random.default_rng(0)
    perm = rng.permutation(X.shape[0])
    n_hold = int(round(X.shape[0] * 0.2))
    hold, train = perm[:n_hold], perm[n_hold:]
    m2 = fit_forest(X[train], y[train], Hyperparams(seed=0), feature_names=names,
                    jobs=4)
    metrics = evaluate(m2, X[hold], y[hold])
    print(f"  holdout R^2 {metrics.r2:.4f}  RMSE {metrics.rmse:.3f} EJ")
    if metrics.r2 < 0.93:
        raise SystemExit(f"holdout R^2 {metrics.r2:.3f} below the 0.93 gate")
    ranking = summarize(m2, X[np.sort(rng.permutation(X.shape[0])[:160])])
    print("  top drivers:", [n for n, _ in ranking.top(3)])
    if ranking.features[0] != "gdp_usd2015":
        raise SystemExit("gdp_usd2015 must rank first in attribution")
    if not 0.715 <= ratio_2060 <= 0.745:
        raise SystemExit(f"2060 ratio {ratio_2060:.4f} outside [0.715, 0.745]")

    write_panel(panel, out / "panel.csv")
    write_scenario(scenario, out / "scenario.csv")
    write_ratio(ratio, out / "ratio.csv")
    print(f"wrote {out / 'panel.csv'} ({len(panel)} rows)")
    print(f"wrote {out / 'scenario.csv'} ({len(scenario)} rows)")
    print(f"wrote {out / 'ratio.csv'} ({len(ratio.series)} rows)")


if __name__ == "__main__":
    try:
        main()
    except KscaleError as exc:
        raise SystemExit(f"sample-data generation failed: {exc}")
