"""End-to-end composition: forest country forecasts per SSP, ratio
projection, global aggregation, index conversion, and the fusion-scenario
extrapolation.

Global energy for a (year, scenario) pair is the predicted selected-country
sum divided by the projected selected-countries-to-world ratio; the
published-table layout reports the four scenario energies per year plus the
index K computed from the first (SSP126) column.
"""

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .arima import ArimaFit, ForecastPath, fit, forecast, select_order
from .attribution import SummaryRanking
from .errors import CompletenessError, DomainError, IntegrityError
from .forest import ForestModel, Metrics
from .ingest import DriverScenario, RatioSeries, Ssp, scenario_matrix
from .timeseries import AnnualSeries
from .units import (AnnualEnergy, KardashevIndex, PowerWatts, YearConvention,
                    k_from_annual_energy, k_from_power, power_from_k)

SSP_ORDER = (Ssp.SSP126, Ssp.SSP245, Ssp.SSP370, Ssp.SSP585)


@dataclass(frozen=True)
class GlobalForecastCell:
    """Global annual energy and index for one (year, scenario)."""

    year: int
    ssp: Ssp
    energy: AnnualEnergy
    k: KardashevIndex
    ratio_used: float
    country_sum: float


@dataclass(frozen=True)
class GlobalForecast:
    """All (year, ssp) cells of one pipeline run."""

    cells: Mapping[tuple[int, Ssp], GlobalForecastCell]

    def get(self, year: int, ssp: Ssp) -> GlobalForecastCell:
        try:
            return self.cells[(year, ssp)]
        except KeyError:
            raise ValueError(f"no forecast cell for ({year}, {ssp.value})") from None

    @property
    def years(self) -> list[int]:
        return sorted({year for year, _ in self.cells})

    @property
    def ssps(self) -> list[Ssp]:
        present = {ssp for _, ssp in self.cells}
        return [s for s in SSP_ORDER if s in present]


def predict_countries(model: ForestModel,
                      scenario: Sequence[DriverScenario]) -> dict[tuple[Ssp, int], float]:
    """Sum per-country predictions for every (ssp, year).

    Coverage must be complete over scenarios x countries x years; the sum
    runs in country-code order so it is invariant to row permutations.
    """
    if not scenario:
        raise ValueError("scenario set is empty")
    keys = set()
    for row in scenario:
        key = (row.ssp, row.country, row.year)
        if key in keys:
            raise IntegrityError(f"duplicate scenario row ({row.ssp.value}, "
                                 f"{row.country}, {row.year})")
        keys.add(key)
    ssps = sorted({r.ssp for r in scenario}, key=lambda s: s.value)
    countries = sorted({r.country for r in scenario})
    years = sorted({r.year for r in scenario})
    gaps = [(s.value, c, y) for s in ssps for c in countries for y in years
            if (s, c, y) not in keys]
    if gaps:
        shown = ", ".join(map(str, gaps[:10]))
        more = "" if len(gaps) <= 10 else f" (+{len(gaps) - 10} more)"
        raise CompletenessError(f"scenario coverage has {len(gaps)} gap(s): {shown}{more}")

    preds = model.predict_matrix(scenario_matrix(scenario))
    by_key = {(r.ssp, r.country, r.year): float(preds[i])
              for i, r in enumerate(scenario)}
    sums: dict[tuple[Ssp, int], float] = {}
    for s in ssps:
        for yr in years:
            sums[(s, yr)] = math.fsum(by_key[(s, c, yr)] for c in countries)
    return sums


def ratio_for_year(history: RatioSeries, path: ForecastPath, year: int) -> float:
    """Ratio at ``year``: historical when covered, else the point forecast."""
    series = history.series
    if year <= series.end_year:
        return series.value_at(year)
    step = year - series.end_year
    if step > path.horizon:
        raise ValueError(f"ratio forecast horizon {path.horizon} does not reach {year}")
    return float(path.point[step - 1])


def aggregate_global(country_sums: Mapping[tuple[Ssp, int], float],
                     ratio_history: RatioSeries,
                     ratio_forecast: ForecastPath,
                     convention: YearConvention = YearConvention.CIVIL_365) -> GlobalForecast:
    """Scale country sums to world totals and attach the index K.

    A projected ratio outside (0, 1] is rejected rather than clamped: it
    means the ratio model, not the aggregation, needs attention.
    """
    cells = {}
    for (ssp, year), total in sorted(country_sums.items(),
                                     key=lambda kv: (kv[0][1], kv[0][0].value)):
        ratio = ratio_for_year(ratio_history, ratio_forecast, year)
        if not 0.0 < ratio <= 1.0:
            raise DomainError(f"projected ratio for {year} is {ratio:.6g}, "
                              "outside (0, 1]; refusing to aggregate")
        energy = AnnualEnergy(total / ratio, convention)
        cells[(year, ssp)] = GlobalForecastCell(
            year=year, ssp=ssp, energy=energy, k=k_from_annual_energy(energy),
            ratio_used=ratio, country_sum=total)
    return GlobalForecast(cells)


@dataclass(frozen=True)
class TableRow:
    """One published-table row: energies per scenario plus K from SSP126."""

    year: int
    energy_ej: Mapping[Ssp, float]
    k: float


def emit_table(forecast_: GlobalForecast, years: Sequence[int]) -> list[TableRow]:
    """Rows (year, SSP126, SSP245, SSP370, SSP585, K) for the requested years."""
    rows = []
    for year in years:
        energies = {}
        for ssp in SSP_ORDER:
            cell = forecast_.get(year, ssp)
            energies[ssp] = cell.energy.value
        k = forecast_.get(year, Ssp.SSP126).k.value
        rows.append(TableRow(year=year, energy_ej=energies, k=k))
    return rows


def calibrate_growth(k_start: KardashevIndex, k_end: KardashevIndex,
                     years: int) -> float:
    """Constant per-year power growth rate carrying K from start to end."""
    if years < 1:
        raise ValueError(f"years must be >= 1, got {years}")
    ratio = power_from_k(k_end).value / power_from_k(k_start).value
    return ratio ** (1.0 / years) - 1.0


@dataclass(frozen=True)
class FusionScenario:
    """Two constant-growth branches anchored at the pivot-year index.

    Default growth rates are calibrated so the branches land on the
    published end-of-century indices (~0.7719 with fusion, ~0.7534
    without) when anchored at K=0.7474 in 2060.
    """

    pivot_year: int = 2060
    k_pivot: KardashevIndex = KardashevIndex(0.7474)
    growth_with_fusion: float = 0.01417
    growth_baseline: float = 0.00346
    horizon_year: int = 2100

    def __post_init__(self):
        if not self.growth_with_fusion > self.growth_baseline >= 0.0:
            raise ValueError("need growth_with_fusion > growth_baseline >= 0, got "
                             f"{self.growth_with_fusion} vs {self.growth_baseline}")
        if self.horizon_year <= self.pivot_year:
            raise ValueError(f"horizon year {self.horizon_year} must be after pivot "
                             f"year {self.pivot_year}")


def fusion_extrapolate(fs: FusionScenario) -> tuple[AnnualSeries, AnnualSeries]:
    """Yearly K trajectories (with fusion, baseline) from pivot to horizon.

    Power grows exponentially on each branch, so K is exactly linear in the
    year; both branches start at the pivot index.
    """
    p_pivot = power_from_k(fs.k_pivot).value
    n_years = fs.horizon_year - fs.pivot_year + 1
    steps = np.arange(n_years)

    def branch(growth: float) -> AnnualSeries:
        ks = [k_from_power(PowerWatts(p_pivot * (1.0 + growth) ** int(t))).value
              for t in steps]
        return AnnualSeries(fs.pivot_year, np.array(ks))

    return branch(fs.growth_with_fusion), branch(fs.growth_baseline)


@dataclass(frozen=True)
class PipelineResult:
    """Everything a full run produces, ready for reporting."""

    model_metrics: Metrics | None
    ratio_fit: ArimaFit
    ratio_forecast: ForecastPath
    forecast: GlobalForecast
    table: list[TableRow]
    fusion: tuple[AnnualSeries, AnnualSeries] | None
    shap_ranking: SummaryRanking | None = None


def project_global(model: ForestModel,
                   scenario: Sequence[DriverScenario],
                   ratio_history: RatioSeries,
                   arima_bounds: tuple[int, int, int] = (3, 2, 3),
                   table_years: Sequence[int] | None = None,
                   convention: YearConvention = YearConvention.CIVIL_365,
                   fusion: FusionScenario | None = None,
                   fixed_order=None) -> PipelineResult:
    """Run the forecasting stages downstream of model training."""
    sums = predict_countries(model, scenario)
    horizon_year = max(year for _, year in sums)
    ratio_end = ratio_history.series.end_year
    if horizon_year <= ratio_end:
        raise ValueError("scenario years must extend past the ratio history")

    if fixed_order is not None:
        order = fixed_order
    else:
        p_max, d_max, q_max = arima_bounds
        order = select_order(ratio_history.series, p_max, d_max, q_max)
    ratio_fit = fit(ratio_history.series, order)
    ratio_fc = forecast(ratio_fit, ratio_history.series, horizon_year - ratio_end)

    global_fc = aggregate_global(sums, ratio_history, ratio_fc, convention)
    if table_years is None:
        table_years = [y for y in global_fc.years if y % 5 == 0]
    table = emit_table(global_fc, table_years)

    fusion_out = None
    if fusion is not None:
        pivot_cell = global_fc.get(fusion.pivot_year, Ssp.SSP126)
        anchored = FusionScenario(
            pivot_year=fusion.pivot_year,
            k_pivot=pivot_cell.k,
            growth_with_fusion=fusion.growth_with_fusion,
            growth_baseline=fusion.growth_baseline,
            horizon_year=fusion.horizon_year,
        )
        fusion_out = fusion_extrapolate(anchored)

    return PipelineResult(model_metrics=None, ratio_fit=ratio_fit,
                          ratio_forecast=ratio_fc, forecast=global_fc,
                          table=table, fusion=fusion_out)
