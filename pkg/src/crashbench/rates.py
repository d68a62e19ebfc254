"""Crashed-vehicle rates, confidence intervals, and safety impact.

Rates are incidents per million miles (IPMM): count / VMT * 1e6, with
counts possibly fractional after unknown-class imputation and the
any-injury underreporting adjustment.  Confidence intervals are exact
Poisson (Garwood) intervals generalized to fractional counts through
gamma quantiles; on integer counts the generalization coincides with
the classic chi-square construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from scipy.special import gammaincinv

from .model import CrashBenchError, GeoArea, RoadClass
from .taxonomy import CrashType, OutcomeLevel

MILLION = 1e6
BILLION = 1e9


class InvalidExposureError(CrashBenchError):
    """VMT must be strictly positive."""


class InvalidFractionError(CrashBenchError):
    """Underreporting fraction must lie in [0, 1)."""


class UndefinedBaselineError(CrashBenchError):
    """Safety impact is undefined for a zero baseline rate."""


class EmptyStratumError(CrashBenchError):
    """A crash-type distribution needs a positive total count."""


def compute_rate(count: float, vmt_miles: float) -> float:
    """Crashed vehicles per million miles."""
    if vmt_miles <= 0:
        raise InvalidExposureError(f"vmt_miles must be > 0, got {vmt_miles}")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    return count / vmt_miles * MILLION


def adjust_underreporting(
    nonfatal_injury_count: float, fatal_count: float, underreport_fraction: float
) -> float:
    """Scale the non-fatal portion of an any-injury count up for crashes
    never reported to police; the fatal portion is passed through.

    adjusted = nonfatal / (1 - u) + fatal.  Applies only to the
    any-injury-reported outcome; no other level is ever adjusted.
    """
    u = underreport_fraction
    if not 0.0 <= u < 1.0:
        raise InvalidFractionError(f"underreport fraction must be in [0, 1), got {u}")
    if nonfatal_injury_count < 0 or fatal_count < 0:
        raise ValueError("counts must be non-negative")
    return nonfatal_injury_count / (1.0 - u) + fatal_count


def poisson_ci(
    count: float, vmt_miles: float, level: float = 0.95
) -> tuple[float, float]:
    """Exact Poisson interval for the rate, in IPMM.

    Garwood construction on the mean scale: the lower bound is the mean
    whose upper tail P(X >= count) equals (1-level)/2, the upper bound
    the mean whose lower tail P(X <= count) equals (1-level)/2.  Via the
    gamma-quantile identity this is gammaincinv(count, a/2) and
    gammaincinv(count + 1, 1 - a/2), which extends to fractional counts.
    count = 0 has a zero lower bound.
    """
    if vmt_miles <= 0:
        raise InvalidExposureError(f"vmt_miles must be > 0, got {vmt_miles}")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    alpha = 1.0 - level
    low = 0.0 if count == 0 else float(gammaincinv(count, alpha / 2.0))
    high = float(gammaincinv(count + 1.0, 1.0 - alpha / 2.0))
    scale = MILLION / vmt_miles
    return low * scale, high * scale


def safety_impact(ads_rate: float, baseline_rate: float) -> float:
    """Percent difference of the ADS rate relative to the benchmark.

    (ads / baseline - 1) * 100; negative means lower ADS crash risk.
    """
    if baseline_rate <= 0:
        raise UndefinedBaselineError(
            f"baseline rate must be > 0, got {baseline_rate}"
        )
    return (ads_rate / baseline_rate - 1.0) * 100.0


@dataclass(frozen=True)
class SafetyImpactResult:
    ads_rate: float
    baseline_rate: float

    @property
    def percent_difference(self) -> float:
        return safety_impact(self.ads_rate, self.baseline_rate)


@dataclass(frozen=True)
class RateCell:
    """One benchmark cell: a stratum, its count, exposure, and rate."""

    geo: GeoArea
    road: RoadClass
    outcome: OutcomeLevel
    count: float
    vmt_miles: float
    crash_type: Optional[CrashType] = None

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"count must be >= 0, got {self.count}")
        if self.vmt_miles <= 0:
            raise InvalidExposureError(f"vmt_miles must be > 0, got {self.vmt_miles}")

    @property
    def rate_ipmm(self) -> float:
        return compute_rate(self.count, self.vmt_miles)

    @property
    def rate_ipbm(self) -> float:
        """Display option for sparse (e.g. fatal) cells."""
        return self.count / self.vmt_miles * BILLION

    @property
    def ci95(self) -> tuple[float, float]:
        return poisson_ci(self.count, self.vmt_miles, level=0.95)


def crash_type_distribution(
    cells: Mapping[CrashType, float] | list[RateCell],
) -> dict[CrashType, float]:
    """Fractions per crash type within one (geo, road, outcome) stratum.

    Accepts either a type -> count mapping or the stratum's typed rate
    cells.  Fractions sum to one; UnknownOther is included like any
    other bucket.
    """
    if isinstance(cells, Mapping):
        counts = dict(cells)
    else:
        counts = {}
        for cell in cells:
            if cell.crash_type is None:
                raise ValueError(f"cell for {cell.outcome.value} has no crash type")
            counts[cell.crash_type] = counts.get(cell.crash_type, 0.0) + cell.count
    total = sum(counts.values())
    if total <= 0:
        raise EmptyStratumError("zero total count in stratum")
    return {ctype: counts[ctype] / total for ctype in counts}


def format_rate(rate_ipmm: float, per_billion: bool = False) -> str:
    """Fixed, locale-independent rate formatting: three decimals, or
    scientific notation below 0.001."""
    value = rate_ipmm * 1000.0 if per_billion else rate_ipmm
    if value != 0.0 and abs(value) < 0.001:
        return f"{value:.3e}"
    return f"{value:.3f}"
