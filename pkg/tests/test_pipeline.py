import math

import numpy as np
import pytest

from kscale.arima import ForecastPath
from kscale.errors import CompletenessError, DomainError, IntegrityError
from kscale.forest import ForestModel, Hyperparams
from kscale.ingest import DriverScenario, RatioSeries, Ssp
from kscale.pipeline import (FusionScenario, GlobalForecast, aggregate_global,
                             calibrate_growth, emit_table, fusion_extrapolate,
                             predict_countries, ratio_for_year)
from kscale.timeseries import AnnualSeries
from kscale.units import (AnnualEnergy, KardashevIndex, YearConvention,
                          k_from_annual_energy)

from test_attribution import manual_tree
from test_ingest import random_drivers

CIVIL = YearConvention.CIVIL_365


def constant_model(value: float) -> ForestModel:
    leaf = manual_tree([-1], [0.0], [-1], [-1], [value], [10])
    from kscale.forest import DRIVER_COLUMNS
    return ForestModel((leaf,), Hyperparams(n_trees=1), 0.0, DRIVER_COLUMNS)


def scenario_grid(rng, ssps, countries, years):
    return [DriverScenario(s, c, y, random_drivers(rng))
            for s in ssps for c in countries for y in years]


def flat_ratio_path(horizon, value=0.8):
    pt = np.full(horizon, value)
    return ForecastPath(horizon=horizon, point=pt, lower95=pt - 0.01,
                        upper95=pt + 0.01, psi=np.ones(horizon))


def history_1996_2020(end_value=0.8):
    return RatioSeries(AnnualSeries(1996, np.linspace(0.82, end_value, 25)))


class TestPredictCountries:
    def test_sums_constant_leaf(self):
        rng = np.random.default_rng(0)
        rows = scenario_grid(rng, [Ssp.SSP126], ["AA", "BB", "CC"], [2030])
        sums = predict_countries(constant_model(5.0), rows)
        assert sums[(Ssp.SSP126, 2030)] == pytest.approx(15.0, abs=1e-12)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(1)
        rows = scenario_grid(rng, list(Ssp), [f"C{i}" for i in range(6)],
                             [2030, 2031])
        a = predict_countries(constant_model(3.0), rows)
        b = predict_countries(constant_model(3.0), rows[::-1])
        assert a == b

    def test_gap_detection(self):
        rng = np.random.default_rng(2)
        rows = scenario_grid(rng, [Ssp.SSP126, Ssp.SSP245], ["AA", "BB"],
                             [2030, 2031])
        with pytest.raises(CompletenessError, match="gap"):
            predict_countries(constant_model(1.0), rows[:-1])

    def test_duplicate_rows(self):
        rng = np.random.default_rng(3)
        rows = scenario_grid(rng, [Ssp.SSP126], ["AA"], [2030])
        with pytest.raises(IntegrityError):
            predict_countries(constant_model(1.0), rows + rows)


class TestAggregate:
    def test_arithmetic(self):
        sums = {(Ssp.SSP126, 2021): 20.0}
        out = aggregate_global(sums, history_1996_2020(),
                               flat_ratio_path(1, 0.8), CIVIL)
        cell = out.get(2021, Ssp.SSP126)
        assert cell.energy.value == pytest.approx(25.0, rel=1e-14)
        assert cell.ratio_used == 0.8
        assert cell.k.value == pytest.approx(
            k_from_annual_energy(AnnualEnergy(25.0, CIVIL)).value, abs=1e-15)

    def test_ratio_one_is_identity(self):
        sums = {(Ssp.SSP245, 2021): 42.0}
        out = aggregate_global(sums, history_1996_2020(),
                               flat_ratio_path(1, 1.0), CIVIL)
        assert out.get(2021, Ssp.SSP245).energy.value == 42.0

    def test_round_trip_identity(self):
        rng = np.random.default_rng(4)
        sums = {(s, y): float(rng.uniform(100, 700))
                for s in Ssp for y in (2021, 2035, 2050)}
        path = flat_ratio_path(30, 0.77)
        out = aggregate_global(sums, history_1996_2020(), path, CIVIL)
        for (s, y), total in sums.items():
            cell = out.get(y, s)
            assert cell.energy.value * cell.ratio_used == pytest.approx(total,
                                                                        rel=1e-14)

    def test_ratio_above_one_rejected(self):
        sums = {(Ssp.SSP126, 2021): 10.0}
        with pytest.raises(DomainError):
            aggregate_global(sums, history_1996_2020(), flat_ratio_path(1, 1.2),
                             CIVIL)

    def test_historical_year_uses_history(self):
        hist = history_1996_2020()
        path = flat_ratio_path(5, 0.8)
        assert ratio_for_year(hist, path, 2010) == \
            pytest.approx(hist.series.value_at(2010))
        assert ratio_for_year(hist, path, 2023) == 0.8
        with pytest.raises(ValueError):
            ratio_for_year(hist, path, 2040)


class TestEmitTable:
    def test_published_2060_row(self):
        energies = {Ssp.SSP126: 939.72, Ssp.SSP245: 935.51,
                    Ssp.SSP370: 928.46, Ssp.SSP585: 928.16}
        cells = {}
        for ssp, e in energies.items():
            ae = AnnualEnergy(e, CIVIL)
            from kscale.pipeline import GlobalForecastCell
            cells[(2060, ssp)] = GlobalForecastCell(
                2060, ssp, ae, k_from_annual_energy(ae), 0.731, e * 0.731)
        rows = emit_table(GlobalForecast(cells), [2060])
        assert rows[0].k == pytest.approx(0.74742, abs=2e-5)
        assert rows[0].energy_ej[Ssp.SSP126] == 939.72

    def test_published_2025_row(self):
        energies = {Ssp.SSP126: 676.73, Ssp.SSP245: 674.61,
                    Ssp.SSP370: 675.57, Ssp.SSP585: 673.64}
        from kscale.pipeline import GlobalForecastCell
        cells = {}
        for ssp, e in energies.items():
            ae = AnnualEnergy(e, CIVIL)
            cells[(2025, ssp)] = GlobalForecastCell(
                2025, ssp, ae, k_from_annual_energy(ae), 0.77, e * 0.77)
        rows = emit_table(GlobalForecast(cells), [2025])
        assert rows[0].k == pytest.approx(0.73316, abs=2e-5)

    def test_identical_energies(self):
        from kscale.pipeline import GlobalForecastCell
        e = 500.0
        cells = {}
        for ssp in Ssp:
            ae = AnnualEnergy(e, CIVIL)
            cells[(2030, ssp)] = GlobalForecastCell(
                2030, ssp, ae, k_from_annual_energy(ae), 0.75, e * 0.75)
        rows = emit_table(GlobalForecast(cells), [2030])
        assert rows[0].k == k_from_annual_energy(AnnualEnergy(e, CIVIL)).value

    def test_uncovered_year(self):
        with pytest.raises(ValueError):
            emit_table(GlobalForecast({}), [2060])


class TestCalibrateGrowth:
    def test_fusion_rate(self):
        # independent evaluation of the closed form
        expected = (10 ** (10 * (0.7719 - 0.7474))) ** (1 / 40) - 1
        got = calibrate_growth(KardashevIndex(0.7474), KardashevIndex(0.7719), 40)
        assert got == pytest.approx(expected, rel=1e-9)
        assert got == pytest.approx(0.0142, abs=2e-4)

    def test_baseline_rate(self):
        expected = (10 ** (10 * (0.7534 - 0.7474))) ** (1 / 40) - 1
        got = calibrate_growth(KardashevIndex(0.7474), KardashevIndex(0.7534), 40)
        assert got == pytest.approx(expected, rel=1e-9)
        assert got == pytest.approx(0.00346, abs=2e-5)

    def test_equal_endpoints(self):
        assert calibrate_growth(KardashevIndex(0.7), KardashevIndex(0.7), 10) == \
            pytest.approx(0.0, abs=1e-15)

    def test_bad_years(self):
        with pytest.raises(ValueError):
            calibrate_growth(KardashevIndex(0.7), KardashevIndex(0.8), 0)


class TestFusion:
    def test_published_endpoints(self):
        with_f, baseline = fusion_extrapolate(FusionScenario())
        assert with_f.start_year == 2060 and with_f.end_year == 2100
        assert with_f.values[-1] == pytest.approx(0.7719, abs=5e-4)
        assert baseline.values[-1] == pytest.approx(0.7534, abs=5e-4)

    def test_branches_anchor_at_pivot(self):
        fs = FusionScenario()
        with_f, baseline = fusion_extrapolate(fs)
        assert with_f.values[0] == pytest.approx(fs.k_pivot.value, abs=1e-12)
        assert baseline.values[0] == pytest.approx(fs.k_pivot.value, abs=1e-12)

    def test_zero_growth_branch_is_flat(self):
        fs = FusionScenario(growth_with_fusion=0.01, growth_baseline=0.0)
        _, baseline = fusion_extrapolate(fs)
        np.testing.assert_allclose(baseline.values, baseline.values[0], atol=1e-12)

    def test_linear_in_year(self):
        with_f, baseline = fusion_extrapolate(FusionScenario())
        for branch, growth in ((with_f, 0.01417), (baseline, 0.00346)):
            increments = np.diff(branch.values)
            assert np.allclose(increments, math.log10(1 + growth) / 10.0, atol=1e-10)
        assert np.all(np.diff(with_f.values) > np.diff(baseline.values))

    def test_invariants(self):
        with pytest.raises(ValueError):
            FusionScenario(growth_with_fusion=0.001, growth_baseline=0.01)
        with pytest.raises(ValueError):
            FusionScenario(horizon_year=2050)
