"""Allometric (power-law) fitting of historical series.

Relations of the form ``y/y0 = (x/x0)**p`` are fitted by ordinary least squares
of ln y on ln x over the years both series share.  No interpolation is ever
performed: historical grids are sparse and uneven.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class SeriesError(ValueError):
    pass


class AlignmentError(SeriesError):
    pass


class FitError(ValueError):
    pass


class IndeterminateError(ValueError):
    """The exponent system is singular (Y-vs-N exponent equal to 1)."""


@dataclass(frozen=True)
class TimeSeries:
    name: str
    years: np.ndarray
    values: np.ndarray
    reference_year: float | None = None
    positive: bool = True

    def __post_init__(self):
        years = np.array(self.years, dtype=float)
        values = np.array(self.values, dtype=float)
        if years.ndim != 1 or years.shape != values.shape:
            raise SeriesError(f"{self.name}: years and values must be equal-length vectors")
        if years.size > 1 and np.any(np.diff(years) <= 0):
            raise SeriesError(f"{self.name}: years must be strictly increasing")
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(years)):
            raise SeriesError(f"{self.name}: non-finite entries")
        if self.positive and np.any(values <= 0):
            i = int(np.flatnonzero(values <= 0)[0])
            raise SeriesError(f"{self.name}: value {values[i]!r} at year {years[i]:g} is not positive")
        years.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.years.size

    @classmethod
    def from_pairs(cls, name: str, pairs, **kw) -> "TimeSeries":
        pairs = list(pairs)
        return cls(name, [p[0] for p in pairs], [p[1] for p in pairs], **kw)

    def value_at(self, year: float) -> float:
        hit = np.flatnonzero(self.years == year)
        if not hit.size:
            raise SeriesError(f"{self.name}: no value at year {year:g}")
        return float(self.values[hit[0]])

    def window(self, start: float | None = None, end: float | None = None) -> "TimeSeries":
        lo = -math.inf if start is None else start
        hi = math.inf if end is None else end
        keep = (self.years >= lo) & (self.years <= hi)
        return TimeSeries(self.name, self.years[keep], self.values[keep], self.reference_year, self.positive)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.years[0]), float(self.years[-1])


@dataclass(frozen=True)
class AllometricFit:
    exponent: float
    intercept: float
    r_squared: float
    residual_std: float
    n_points: int
    year_range: tuple[float, float]
    x_name: str = ""
    y_name: str = ""
    method: str = "ols"

    def as_row(self) -> dict[str, object]:
        return {
            "x": self.x_name,
            "y": self.y_name,
            "year_start": self.year_range[0],
            "year_end": self.year_range[1],
            "exponent": self.exponent,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "residual_std": self.residual_std,
            "n_points": self.n_points,
            "method": self.method,
        }


@dataclass(frozen=True)
class Aligned:
    years: np.ndarray
    x: np.ndarray
    y: np.ndarray


def normalize(series: TimeSeries, reference_year: float | None = None) -> TimeSeries:
    """Divide by the value at ``reference_year`` (default: first year)."""
    ref = series.years[0] if reference_year is None else reference_year
    base = series.value_at(ref)
    return TimeSeries(series.name, series.years, series.values / base, float(ref), series.positive)


def growth_rate_series(series: TimeSeries) -> TimeSeries:
    """(t[n+1]-t[n])^-1 ln(v[n+1]/v[n]) stamped at interval midpoints."""
    if len(series) < 2:
        raise SeriesError(f"{series.name}: need at least two points for growth rates")
    y, v = series.years, series.values
    rates = np.diff(np.log(v)) / np.diff(y)
    return TimeSeries(f"{series.name}_rate", 0.5 * (y[1:] + y[:-1]), rates, positive=False)


def align(a: TimeSeries, b: TimeSeries) -> Aligned:
    years, ia, ib = np.intersect1d(a.years, b.years, assume_unique=True, return_indices=True)
    if not years.size:
        raise AlignmentError(f"{a.name} and {b.name} share no years")
    return Aligned(years, a.values[ia], b.values[ib])


def _ols(lx: np.ndarray, ly: np.ndarray) -> tuple[float, float, float, float]:
    xm, ym = lx.mean(), ly.mean()
    sxx = np.sum((lx - xm) ** 2)
    if sxx <= 1e-300:
        raise FitError("ln(x) has zero variance")
    slope = float(np.sum((lx - xm) * (ly - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = ly - (intercept + slope * lx)
    sst = float(np.sum((ly - ym) ** 2))
    r2 = 1.0 if sst == 0 else max(0.0, min(1.0, 1.0 - float(np.sum(resid**2)) / sst))
    dof = lx.size - 2
    rstd = float(np.sqrt(np.sum(resid**2) / dof)) if dof > 0 else 0.0
    return slope, intercept, r2, rstd


def fit_allometric(
    x: TimeSeries,
    y: TimeSeries,
    year_range: tuple[float, float] | None = None,
    *,
    method: str = "ols",
    min_points: int = 3,
) -> AllometricFit:
    """Fit ``ln y = intercept + exponent * ln x`` over the shared years.

    ``method="nls"`` instead minimises squared residuals of ``y`` itself
    (``y = exp(intercept) x**exponent``), seeded by the log-space solution; it
    exists for sensitivity checks.
    """
    pairs = align(x, y)
    keep = np.ones(pairs.years.size, dtype=bool)
    if year_range is not None:
        keep = (pairs.years >= year_range[0]) & (pairs.years <= year_range[1])
    yrs, xv, yv = pairs.years[keep], pairs.x[keep], pairs.y[keep]
    if yrs.size < min_points:
        raise FitError(f"only {yrs.size} aligned points in range (need {min_points})")
    lx, ly = np.log(xv), np.log(yv)
    slope, intercept, r2, rstd = _ols(lx, ly)
    if method == "nls":
        from scipy.optimize import curve_fit

        (intercept, slope), _ = curve_fit(
            lambda lxx, c, p: np.exp(c + p * lxx), lx, yv, p0=(intercept, slope), maxfev=10000
        )
        intercept, slope = float(intercept), float(slope)
        resid = ly - (intercept + slope * lx)
        sst = float(np.sum((ly - ly.mean()) ** 2))
        r2 = 1.0 if sst == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / sst)
        rstd = float(np.sqrt(np.sum(resid**2) / (yrs.size - 2))) if yrs.size > 2 else 0.0
    elif method != "ols":
        raise ValueError(f"unknown fit method {method!r}")
    return AllometricFit(slope, intercept, r2, rstd, int(yrs.size), (float(yrs[0]), float(yrs[-1])),
                         x.name, y.name, method)


def epoch_fits(
    x: TimeSeries,
    y: TimeSeries,
    breakpoints=(),
    year_range: tuple[float, float] | None = None,
    *,
    min_points: int = 2,
    method: str = "ols",
) -> list[AllometricFit]:
    """One fit per epoch; neighbouring epochs share their boundary year.

    The default ``min_points=2`` admits two-point epochs, where the fit is the
    exact line through both points (the sparse early GDP record has one datum
    per millennium).
    """
    pairs = align(x, y)
    lo, hi = float(pairs.years[0]), float(pairs.years[-1])
    if year_range is not None:
        lo, hi = max(lo, year_range[0]), min(hi, year_range[1])
    bps = sorted(float(b) for b in breakpoints)
    for b in bps:
        if not lo < b < hi:
            raise FitError(f"breakpoint {b:g} outside the data range ({lo:g}, {hi:g})")
    edges = [lo, *bps, hi]
    return [
        fit_allometric(x, y, (edges[i], edges[i + 1]), method=method, min_points=min_points)
        for i in range(len(edges) - 1)
    ]


@dataclass(frozen=True)
class AlphaSolution:
    alpha1: float
    alpha2: float
    beta: float
    valid: bool
    reason: str = ""


def forward_exponents(alpha1: float, alpha2: float) -> tuple[float, float, float]:
    """(Y-vs-R, N-vs-R, Y-vs-N) allometric exponents implied by the
    production exponents: (alpha1+alpha2, (1-alpha1)/(beta*alpha2),
    alpha2/(1-alpha1))."""
    beta_inv = alpha1 + alpha2
    return beta_inv, (1 - alpha1) * beta_inv / alpha2, alpha2 / (1 - alpha1)


def solve_alphas(beta_inv: float, ratio: float) -> AlphaSolution:
    """Recover (alpha1, alpha2, beta) from beta^-1 = alpha1 + alpha2 and
    ratio = alpha2 / (1 - alpha1)."""
    if not beta_inv > 0:
        raise ValueError(f"beta_inv must be > 0, got {beta_inv!r}")
    if abs(ratio - 1.0) <= 1e-12:
        raise IndeterminateError("ratio = 1: alpha1 is undetermined (Solow-neutral degenerate case)")
    a1 = (beta_inv - ratio) / (1 - ratio)
    a2 = beta_inv - a1
    problems = []
    if not 0 < a1 < 1:
        problems.append(f"alpha1 = {a1:.6g} outside (0, 1)")
    if not a2 > 0:
        problems.append(f"alpha2 = {a2:.6g} not positive")
    valid = not problems
    if valid:
        assert abs(a2 / (1 - a1) - ratio) <= 1e-9 * max(1.0, abs(ratio))
    return AlphaSolution(a1, a2, 1.0 / beta_inv, valid, "; ".join(problems))


@dataclass(frozen=True)
class RateComparison:
    years: np.ndarray
    rate_a: np.ndarray
    rate_b: np.ndarray
    b_exceeds: int
    a_exceeds: int
    ties: int
    names: tuple[str, str] = field(default=("a", "b"))

    @property
    def n_intervals(self) -> int:
        return self.years.size

    @property
    def fraction_b_exceeds(self) -> float:
        return self.b_exceeds / self.n_intervals

    @property
    def verdict(self) -> str:
        if self.b_exceeds == self.a_exceeds:
            return "tie"
        return f"{self.names[1]} dominates" if self.b_exceeds > self.a_exceeds else f"{self.names[0]} dominates"


def rate_comparison(
    a: TimeSeries,
    b: TimeSeries,
    year_range: tuple[float, float] | None = None,
    rel_tol: float = 1e-12,
) -> RateComparison:
    """Interval-by-interval growth rates of two series over their shared years,
    counting where b's rate exceeds a's."""
    pairs = align(a, b)
    keep = np.ones(pairs.years.size, dtype=bool)
    if year_range is not None:
        keep = (pairs.years >= year_range[0]) & (pairs.years <= year_range[1])
    if keep.sum() < 2:
        raise AlignmentError("need at least two shared years in range")
    ga = growth_rate_series(TimeSeries(a.name, pairs.years[keep], pairs.x[keep]))
    gb = growth_rate_series(TimeSeries(b.name, pairs.years[keep], pairs.y[keep]))
    diff = gb.values - ga.values
    close = np.abs(diff) <= rel_tol * np.maximum(np.abs(ga.values), np.abs(gb.values))
    return RateComparison(
        ga.years, ga.values, gb.values,
        int(np.sum((diff > 0) & ~close)), int(np.sum((diff < 0) & ~close)), int(np.sum(close)),
        (a.name, b.name),
    )
