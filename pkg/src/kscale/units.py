"""Kardashev-index algebra: conversions between power, annual energy and K.

Sagan's continuous index is K = (log10 P - 6) / 10 with P the mean power in
watts, so K = 1 corresponds to exactly 1e16 W and a tenfold power increase
raises K by 0.1. Annual energies are expressed in exajoules per year and
carry an explicit seconds-per-year convention; the 365-day civil year is
what makes published EJ-to-K tables reproduce to five decimals.
"""

import enum
import math
from dataclasses import dataclass

from .errors import DomainError

EJ = 1.0e18  # joules per exajoule


class YearConvention(enum.Enum):
    """Seconds per year used when turning annual energy into mean power."""

    CIVIL_365 = 31_536_000
    JULIAN = 31_557_600

    @property
    def seconds(self) -> int:
        return self.value


@dataclass(frozen=True)
class PowerWatts:
    """Mean power consumption rate in watts; strictly positive and finite."""

    value: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value > 0.0):
            raise DomainError(f"power must be positive and finite, got {self.value!r}")


@dataclass(frozen=True)
class AnnualEnergy:
    """Energy per year in EJ. The year convention is always explicit."""

    value: float
    convention: YearConvention

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value > 0.0):
            raise DomainError(f"annual energy must be positive and finite, got {self.value!r}")
        if not isinstance(self.convention, YearConvention):
            raise DomainError(f"not a year convention: {self.convention!r}")


@dataclass(frozen=True)
class KardashevIndex:
    """Dimensionless position on the Kardashev scale."""

    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError(f"Kardashev index must be finite, got {self.value!r}")


def k_from_power(p: PowerWatts) -> KardashevIndex:
    """Index for a power level: (log10 P - 6) / 10."""
    return KardashevIndex((math.log10(p.value) - 6.0) / 10.0)


def power_from_k(k: KardashevIndex) -> PowerWatts:
    """Power for an index: 10 ** (10 K + 6). Inverse of :func:`k_from_power`."""
    return PowerWatts(10.0 ** (10.0 * k.value + 6.0))


def power_from_annual_energy(e: AnnualEnergy) -> PowerWatts:
    """Mean power sustained over one year of the given convention."""
    return PowerWatts(e.value * EJ / e.convention.seconds)


def annual_energy_from_power(p: PowerWatts, convention: YearConvention) -> AnnualEnergy:
    """Energy consumed in one year at constant power ``p``."""
    return AnnualEnergy(p.value * convention.seconds / EJ, convention)


def k_from_annual_energy(e: AnnualEnergy) -> KardashevIndex:
    """Index for an annual energy consumption."""
    return k_from_power(power_from_annual_energy(e))
