"""Normalized quadratic functionals of the Brownian sheet on ``[0, 1]^d``.

In one dimension the functional is ``I_2(f_eps)`` with
``f_eps(x, y) = (4 log 1/eps)^(-1/2) (1 / max(x, y, eps) - 1)``; in ``d``
dimensions the kernel is the ``d``-fold product, so its operator spectrum is
the set of ``d``-fold products of the one-dimensional eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import chaos2
from .chaos2 import Chaos2Spectrum, cumulant_coefficient
from .empirical import dkw_radius, kolmogorov_distance
from .numerics import RandomSource, eigenvalues_symmetric
from .tensor import GridTensor

EPS_LADDER = tuple(math.exp(-k) for k in range(3, 8))
M_LADDER = (200, 400, 800)
MAX_D = 4
MAX_KRONECKER = 250_000


@dataclass(frozen=True)
class SheetModel:
    d: int
    eps: float
    m: int

    def __post_init__(self):
        if not 1 <= self.d <= MAX_D:
            raise ValueError(f"dimension must be in [1, {MAX_D}]")
        if not 0 < self.eps < 0.9:
            raise ValueError("eps must lie in (0, 0.9); the normalization blows up as eps -> 1")
        if self.m < 1:
            raise ValueError("grid size must be positive")

    @property
    def log_inv_eps(self) -> float:
        return -math.log(self.eps)

    @property
    def reference_rate(self) -> float:
        return self.log_inv_eps ** (-self.d / 2)


def _cell_integrals(lo1, hi1, lo2, hi2, eps: float) -> np.ndarray:
    """``int int`` over ``[lo1, hi1] x [lo2, hi2]`` of ``1 / max(x, y, eps) - 1``.

    Uses the representation ``int_eps^1 t^-2 1{x < t} 1{y < t} dt`` and
    integrates the product of the two clipped overlap lengths exactly.
    """
    lo1, hi1, lo2, hi2 = np.broadcast_arrays(*(np.asarray(v, float) for v in (lo1, hi1, lo2, hi2)))
    bps = np.sort(np.stack([lo1, hi1, lo2, hi2, np.full_like(lo1, eps), np.ones_like(lo1)]), axis=0)
    bps = np.clip(bps, eps, 1.0)
    total = np.zeros_like(lo1)
    for k in range(bps.shape[0] - 1):
        a, b = bps[k], bps[k + 1]
        live = b > a
        if not np.any(live):
            continue
        mid = 0.5 * (a + b)
        # overlap length of [lo, hi] with [0, t] is alpha + beta t on this piece
        al1 = np.where(mid < lo1, 0.0, np.where(mid < hi1, -lo1, hi1 - lo1))
        be1 = np.where((mid >= lo1) & (mid < hi1), 1.0, 0.0)
        al2 = np.where(mid < lo2, 0.0, np.where(mid < hi2, -lo2, hi2 - lo2))
        be2 = np.where((mid >= lo2) & (mid < hi2), 1.0, 0.0)
        c0, c1, c2 = al1 * al2, al1 * be2 + al2 * be1, be1 * be2
        with np.errstate(divide="ignore", invalid="ignore"):
            seg = c0 * (1.0 / a - 1.0 / b) + c1 * np.log(b / a) + c2 * (b - a)
        total += np.where(live, seg, 0.0)
    return total


def sheet_kernel_1d(eps: float, m: int, rule: str = "cell") -> GridTensor:
    """The one-dimensional kernel on ``m`` cells of ``[0, 1]``.

    ``rule="cell"`` stores exact cell averages, which makes the discrete
    operator the Galerkin projection of the true one (eigenvalues converge
    from below).  ``rule="midpoint"`` samples the kernel at cell centres.
    """
    SheetModel(1, eps, m)
    h = 1.0 / m
    norm = (4.0 * -math.log(eps)) ** -0.5
    if rule == "midpoint":
        x = (np.arange(m) + 0.5) * h
        vals = 1.0 / np.maximum(np.maximum.outer(x, x), eps) - 1.0
    elif rule == "cell":
        lo = np.arange(m) * h
        i, j = np.tril_indices(m)
        low = _cell_integrals(lo[i], lo[i] + h, lo[j], lo[j] + h, eps) / (h * h)
        vals = np.zeros((m, m))
        vals[i, j] = low
        vals[j, i] = low
    else:
        raise ValueError(f"unknown discretization rule {rule!r}")
    return GridTensor(norm * vals, 1.0)


def graded_edges(eps: float, m: int) -> np.ndarray:
    """One cell ``[0, eps]`` and ``m - 1`` geometric cells on ``[eps, 1]``."""
    return np.concatenate([[0.0], np.geomspace(eps, 1.0, m)])


def spectrum_1d(eps: float, m: int, rule: str = "graded") -> Chaos2Spectrum:
    """Operator spectrum of the one-dimensional kernel.

    ``rule="graded"`` projects onto indicators of the cells of
    :func:`graded_edges`, normalized in ``L^2``.  The kernel is constant on
    ``[0, eps]^2`` and scale-free above ``eps``, so this converges much faster
    than a uniform grid for small ``eps``.
    """
    if rule != "graded":
        return chaos2.spectrum(sheet_kernel_1d(eps, m, rule))
    SheetModel(1, eps, m)
    if m < 2:
        raise ValueError("graded rule needs at least two cells")
    e = graded_edges(eps, m)
    lo, hi = e[:-1], e[1:]
    w = hi - lo
    i, j = np.tril_indices(m)
    low = _cell_integrals(lo[i], hi[i], lo[j], hi[j], eps) / np.sqrt(w[i] * w[j])
    a = np.zeros((m, m))
    a[i, j] = low
    a[j, i] = low
    a *= (4.0 * -math.log(eps)) ** -0.5
    return Chaos2Spectrum(eigenvalues_symmetric(a, name="graded sheet operator"), float(np.max(w)))


def kronecker_spectrum(s: Chaos2Spectrum, d: int) -> Chaos2Spectrum:
    """Spectrum of the ``d``-fold product kernel: all ``d``-fold eigenvalue products."""
    if len(s) ** d > MAX_KRONECKER:
        raise ValueError(f"product spectrum of size {len(s) ** d} exceeds {MAX_KRONECKER}")
    lam = s.eigenvalues
    out = lam
    for _ in range(d - 1):
        out = np.multiply.outer(out, lam).ravel()
    return Chaos2Spectrum(out, s.h**d)


def lift_cumulant(k1: float, j: int, d: int) -> float:
    c = cumulant_coefficient(j)
    return c * (k1 / c) ** d


@dataclass(frozen=True)
class SheetCumulants:
    model: SheetModel
    one_d: dict[int, float]
    lifted: dict[int, float]
    kronecker: dict[int, float] | None

    def max_route_gap(self) -> float | None:
        if self.kronecker is None:
            return None
        return max(abs(self.lifted[j] - self.kronecker[j]) / abs(self.kronecker[j])
                   for j in self.lifted)


def sheet_cumulants(model: SheetModel, jmax: int = 6, kronecker: bool | None = None,
                    rule: str = "graded", s1: Chaos2Spectrum | None = None) -> SheetCumulants:
    """Cumulants ``kappa_j(d, eps)``, ``j = 2..jmax``, by the product identity.

    With ``kronecker`` (default on for ``d = 2``) the same cumulants are also
    computed from the explicit product spectrum as an independent route.
    """
    if not 2 <= jmax <= 8:
        raise ValueError("jmax must be in [2, 8]")
    s1 = s1 if s1 is not None else spectrum_1d(model.eps, model.m, rule)
    one = {j: chaos2.cumulant(s1, j) for j in range(2, jmax + 1)}
    lifted = {j: lift_cumulant(one[j], j, model.d) for j in one}
    if kronecker is None:
        kronecker = model.d == 2
    kron = None
    if kronecker and model.d >= 2:
        sk = kronecker_spectrum(s1, model.d)
        kron = {j: chaos2.cumulant(sk, j) for j in one}
    return SheetCumulants(model, one, lifted, kron)


@dataclass(frozen=True)
class SheetRateReport:
    model: SheetModel
    n: int
    standardized: bool
    limit_variance: float
    kappa2: float
    kappa3: float
    kappa4: float
    phi: float
    d_kol: float
    dkw: float
    reference_rate: float
    ratio_to_phi: float
    scaled_distance: float
    upper_bound_holds: bool
    underpowered: bool


def sheet_rate_report(model: SheetModel, src: RandomSource, n: int, workers: int = 1,
                      delta: float = 0.01, rule: str = "graded", standardized: bool = False,
                      sample_out: list | None = None) -> SheetRateReport:
    """Stein bound versus the sampled Kolmogorov distance for one ``(d, eps)`` point.

    Samples use the one-dimensional spectrum (``d = 1``) or the explicit
    product spectrum (``d = 2``).  With the ``(4 log 1/eps)^(-d/2)``
    normalization the variance tends to ``2^(1-d)``, which is carried as
    ``limit_variance``; ``standardized=True`` rescales to unit variance first.
    When ``sample_out`` is a list the sorted sample is appended to it.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if model.d > 2:
        raise ValueError("sampling is available for d <= 2 only")
    s1 = spectrum_1d(model.eps, model.m, rule)
    sp = s1 if model.d == 1 else kronecker_spectrum(s1, model.d)
    if standardized:
        sp = chaos2.standardize(sp)
    k2, k3, k4 = (chaos2.cumulant(sp, j) for j in (2, 3, 4))
    phi = math.sqrt(k4 / 6.0 + (k2 - 1.0) ** 2)
    x = np.sort(chaos2.sample(sp, src, n, workers))
    if sample_out is not None:
        sample_out.append(x)
    d = kolmogorov_distance(x, presorted=True)
    r = dkw_radius(n, delta)
    return SheetRateReport(model, n, standardized, 1.0 if standardized else 2.0 ** (1 - model.d),
                           k2, k3, k4, phi, d, r, model.reference_rate, d / phi,
                           d / model.reference_rate, d <= phi + r, r > phi / 3)


@dataclass(frozen=True)
class GridConvergence:
    eps: float
    ms: tuple[int, ...]
    values: dict[int, list[float]]
    observed_order: dict[int, float | None]
    extrapolated: dict[int, float | None]


def grid_convergence(eps: float, ms=M_LADDER, jmax: int = 4, rule: str = "graded") -> GridConvergence:
    """One-dimensional cumulants across a doubling grid ladder with a Richardson estimate."""
    ms = tuple(ms)
    vals = {j: [] for j in range(2, jmax + 1)}
    for m in ms:
        s = spectrum_1d(eps, m, rule)
        for j in vals:
            vals[j].append(chaos2.cumulant(s, j))
    order, extra = {}, {}
    for j, v in vals.items():
        order[j] = extra[j] = None
        if len(v) >= 3:
            d1, d2 = v[-2] - v[-3], v[-1] - v[-2]
            if d1 != 0 and d2 != 0 and d1 * d2 > 0:
                ratio = ms[-1] / ms[-2]
                p = math.log(abs(d1 / d2)) / math.log(ratio)
                order[j] = p
                extra[j] = v[-1] + d2 / (ratio**p - 1) if p > 0 else None
    return GridConvergence(eps, ms, vals, order, extra)
