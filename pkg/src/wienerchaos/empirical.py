"""Empirical distribution checks against the standard normal law."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .stein import normal_cdf, normal_pdf, phi_cdf_derivative


def _sorted(sample) -> np.ndarray:
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("sample is empty")
    if np.isnan(x).any():
        raise ValueError("sample contains NaN")
    return x


def kolmogorov_distance(sample, *, presorted: bool = False) -> float:
    """Exact ``sup_z |F_n(z) - Phi(z)|``; the supremum is attained at a sample point."""
    x = np.asarray(sample, dtype=float) if presorted else _sorted(sample)
    n = x.size
    if n == 0:
        raise ValueError("sample is empty")
    cdf = np.asarray(normal_cdf(x))
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def dkw_radius(n: int, delta: float = 0.01) -> float:
    """Radius ``r`` with ``P(sup |F_n - F| > r) <= delta``."""
    if n < 1 or not 0 < delta < 1:
        raise ValueError("need n >= 1 and delta in (0, 1)")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


def ecdf(sorted_sample: np.ndarray, z):
    return np.searchsorted(sorted_sample, np.asarray(z, dtype=float), side="right") / sorted_sample.size


def predicted_ratio(rho: float, z):
    """Limit of ``(P(F <= z) - Phi(z)) / phi`` in terms of the limit correlation ``rho``."""
    z = np.asarray(z, dtype=float)
    return rho / 3.0 * (z * z - 1.0) * np.asarray(normal_pdf(z))


@dataclass(frozen=True)
class RatioPoint:
    z: float
    ratio: float
    se: float
    predicted: float | None

    @property
    def deviation(self) -> float | None:
        """Distance to the prediction in standard errors."""
        if self.predicted is None:
            return None
        d = self.ratio - self.predicted
        return 0.0 if d == 0 else (math.inf if self.se == 0 else d / self.se)


def ratio_curve(sample, phi: float, z_grid, rho: float | None = None, *,
                presorted: bool = False) -> list[RatioPoint]:
    if phi <= 0:
        raise ValueError("phi must be positive")
    x = np.asarray(sample, dtype=float) if presorted else _sorted(sample)
    z = np.asarray(z_grid, dtype=float)
    p = np.asarray(normal_cdf(z))
    ratio = (ecdf(x, z) - p) / phi
    se = np.sqrt(p * (1 - p) / x.size) / phi
    pred = predicted_ratio(rho, z) if rho is not None else [None] * z.size
    return [RatioPoint(float(a), float(b), float(c), None if d is None else float(d))
            for a, b, c, d in zip(z, ratio, se, pred)]


@dataclass(frozen=True)
class EdgeworthCheck:
    max_plain: float
    max_corrected: float
    se: float
    underpowered: bool

    @property
    def improved(self) -> bool:
        return self.max_corrected <= 0.5 * self.max_plain


def edgeworth_check(sample, kappa3: float, z_grid, *, presorted: bool = False) -> EdgeworthCheck:
    """Compare ``P_n(F <= z) - Phi(z)`` with the skewness-corrected residual over a grid.

    The check is flagged underpowered when the largest binomial standard error
    on the grid exceeds a tenth of the plain discrepancy, since then the
    corrected residual cannot be resolved at the 50% level.
    """
    x = np.asarray(sample, dtype=float) if presorted else _sorted(sample)
    z = np.asarray(z_grid, dtype=float)
    p = np.asarray(normal_cdf(z))
    emp = ecdf(x, z)
    plain = np.abs(emp - p)
    corrected = np.abs(emp - p + kappa3 / 6.0 * np.asarray(phi_cdf_derivative(3, z)))
    se = float(np.max(np.sqrt(p * (1 - p) / x.size)))
    mp = float(plain.max())
    return EdgeworthCheck(mp, float(corrected.max()), se, se > 0.1 * mp)


@dataclass(frozen=True)
class EmpiricalStudy:
    n: int
    sample: np.ndarray
    d_kol: float
    delta: float
    dkw: float
    ratios: list[RatioPoint]


def empirical_study(sample, phi: float, z_grid, rho: float | None = None,
                    delta: float = 0.01) -> EmpiricalStudy:
    x = _sorted(sample)
    return EmpiricalStudy(x.size, x, kolmogorov_distance(x, presorted=True), delta,
                          dkw_radius(x.size, delta),
                          ratio_curve(x, phi, z_grid, rho, presorted=True))
