"""Schema-validated loading of the three input datasets.

All inputs are headered UTF-8 CSV with ``.`` decimals and no thousands
separators. Headers must match the schema exactly; every accepted record
re-validates its type invariants, and rejected rows name file, line and
column. Nothing is imputed: gaps and malformed values are errors.
"""

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import IntegrityError, SchemaError, ValidationError
from .forest import DRIVER_COLUMNS, _FIELD_BY_COLUMN, FeatureVector
from .timeseries import AnnualSeries

PANEL_COLUMNS = ("country", "year") + DRIVER_COLUMNS + ("energy_ej",)
SCENARIO_COLUMNS = ("ssp", "country", "year") + DRIVER_COLUMNS
RATIO_COLUMNS = ("year", "ratio")

YEAR_MIN, YEAR_MAX = 1900, 2100


class Ssp(enum.Enum):
    """The four shared socioeconomic pathway scenarios used for forecasts."""

    SSP126 = "SSP126"
    SSP245 = "SSP245"
    SSP370 = "SSP370"
    SSP585 = "SSP585"


@dataclass(frozen=True)
class PanelRecord:
    """One historical country-year: drivers plus observed energy (EJ)."""

    country: str
    year: int
    drivers: FeatureVector
    energy: float

    def __post_init__(self):
        if not (math.isfinite(self.energy) and self.energy > 0):
            raise ValueError(f"energy must be positive and finite, got {self.energy!r}")
        if not YEAR_MIN <= self.year <= YEAR_MAX:
            raise ValueError(f"year must lie in [{YEAR_MIN}, {YEAR_MAX}], got {self.year}")


@dataclass(frozen=True)
class DriverScenario:
    """One projected country-year of drivers under an SSP scenario."""

    ssp: Ssp
    country: str
    year: int
    drivers: FeatureVector

    def __post_init__(self):
        if not YEAR_MIN <= self.year <= YEAR_MAX:
            raise ValueError(f"year must lie in [{YEAR_MIN}, {YEAR_MAX}], got {self.year}")


@dataclass(frozen=True)
class RatioSeries:
    """Selected-countries share of world energy, one value per year in (0, 1]."""

    series: AnnualSeries

    def __post_init__(self):
        v = self.series.values
        if np.any(v <= 0.0) or np.any(v > 1.0):
            raise ValueError("ratio values must lie in (0, 1]")


def _read_rows(path, expected_header: Sequence[str]):
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"{path}: cannot open file ({exc})") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty, expected header "
                              f"{','.join(expected_header)}") from None
        if tuple(header) != tuple(expected_header):
            missing = [c for c in expected_header if c not in header]
            extra = [c for c in header if c not in expected_header]
            detail = []
            if missing:
                detail.append("missing column(s): " + ", ".join(missing))
            if extra:
                detail.append("unexpected column(s): " + ", ".join(extra))
            if not detail:
                detail.append("columns are out of order")
            raise SchemaError(f"{path}: header does not match schema ({'; '.join(detail)})")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise ValidationError(f"{path}:{lineno}: expected "
                                      f"{len(expected_header)} fields, got {len(row)}")
            rows.append((lineno, row))
    return path, rows


def _parse_float(path, lineno, column, text) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: column {column!r} is not a number: "
                              f"{text!r}") from None
    if not math.isfinite(v):
        raise ValidationError(f"{path}:{lineno}: column {column!r} must be finite, "
                              f"got {text!r}")
    return v


def _parse_int(path, lineno, column, text) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: column {column!r} is not an integer: "
                              f"{text!r}") from None


def _parse_drivers(path, lineno, named) -> FeatureVector:
    kwargs = {_FIELD_BY_COLUMN[col]: _parse_float(path, lineno, col, named[col])
              for col in DRIVER_COLUMNS}
    try:
        return FeatureVector(**kwargs)
    except ValueError as exc:
        raise ValidationError(f"{path}:{lineno}: {exc}") from None


def load_panel(path) -> list[PanelRecord]:
    """Load and validate the historical country-year panel."""
    path, rows = _read_rows(path, PANEL_COLUMNS)
    records = []
    seen = set()
    for lineno, row in rows:
        named = dict(zip(PANEL_COLUMNS, row))
        country = named["country"].strip()
        if not country:
            raise ValidationError(f"{path}:{lineno}: empty country code")
        year = _parse_int(path, lineno, "year", named["year"])
        drivers = _parse_drivers(path, lineno, named)
        energy = _parse_float(path, lineno, "energy_ej", named["energy_ej"])
        try:
            rec = PanelRecord(country, year, drivers, energy)
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
        key = (country, year)
        if key in seen:
            raise IntegrityError(f"{path}:{lineno}: duplicate (country, year) = {key}")
        seen.add(key)
        records.append(rec)
    if not records:
        raise ValidationError(f"{path}: no data rows")
    return records


def load_scenario(path) -> list[DriverScenario]:
    """Load and validate the SSP-conditioned future driver rows."""
    path, rows = _read_rows(path, SCENARIO_COLUMNS)
    records = []
    seen = set()
    valid_ssps = {m.value for m in Ssp}
    for lineno, row in rows:
        named = dict(zip(SCENARIO_COLUMNS, row))
        ssp_text = named["ssp"].strip()
        if ssp_text not in valid_ssps:
            raise ValidationError(f"{path}:{lineno}: column 'ssp' must be one of "
                                  f"{sorted(valid_ssps)}, got {ssp_text!r}")
        country = named["country"].strip()
        if not country:
            raise ValidationError(f"{path}:{lineno}: empty country code")
        year = _parse_int(path, lineno, "year", named["year"])
        drivers = _parse_drivers(path, lineno, named)
        try:
            rec = DriverScenario(Ssp(ssp_text), country, year, drivers)
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
        key = (rec.ssp, country, year)
        if key in seen:
            raise IntegrityError(f"{path}:{lineno}: duplicate (ssp, country, year) = "
                                 f"({ssp_text}, {country}, {year})")
        seen.add(key)
        records.append(rec)
    if not records:
        raise ValidationError(f"{path}: no data rows")
    return records


def load_ratio(path) -> RatioSeries:
    """Load the selected-countries-to-world ratio series."""
    path, rows = _read_rows(path, RATIO_COLUMNS)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    years = []
    values = []
    for lineno, row in rows:
        year = _parse_int(path, lineno, "year", row[0])
        ratio = _parse_float(path, lineno, "ratio", row[1])
        if not 0.0 < ratio <= 1.0:
            raise ValidationError(f"{path}:{lineno}: ratio must lie in (0, 1], got {ratio}")
        if years and year != years[-1] + 1:
            raise ValidationError(f"{path}:{lineno}: years must be consecutive, "
                                  f"got {year} after {years[-1]}")
        years.append(year)
        values.append(ratio)
    return RatioSeries(AnnualSeries(years[0], np.array(values)))


def assemble_matrix(records: Sequence[PanelRecord]):
    """Stack panel records into (X, y, feature_names), rows in input order."""
    if not records:
        raise ValueError("cannot assemble an empty record set")
    X = np.array([r.drivers.as_array(DRIVER_COLUMNS) for r in records])
    y = np.array([r.energy for r in records])
    return X, y, DRIVER_COLUMNS


def scenario_matrix(rows: Sequence[DriverScenario]) -> np.ndarray:
    """Driver matrix for scenario rows, in input order."""
    if not rows:
        raise ValueError("cannot assemble an empty scenario set")
    return np.array([r.drivers.as_array(DRIVER_COLUMNS) for r in rows])


def write_panel(records: Sequence[PanelRecord], path) -> None:
    """Write panel records; floats use shortest round-trip formatting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(PANEL_COLUMNS)
        for r in records:
            w.writerow([r.country, r.year]
                       + [repr(r.drivers.value(c)) for c in DRIVER_COLUMNS]
                       + [repr(r.energy)])


def write_scenario(records: Sequence[DriverScenario], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SCENARIO_COLUMNS)
        for r in records:
            w.writerow([r.ssp.value, r.country, r.year]
                       + [repr(r.drivers.value(c)) for c in DRIVER_COLUMNS])


def write_ratio(ratio: RatioSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RATIO_COLUMNS)
        for year, value in zip(ratio.series.years, ratio.series.values):
            w.writerow([int(year), repr(float(value))])


def sample_path(name: str) -> Path:
    """Path of a bundled sample dataset (panel.csv, scenario.csv, ratio.csv)."""
    from importlib.resources import files

    return Path(str(files("kscale") / "sample_data" / name))
