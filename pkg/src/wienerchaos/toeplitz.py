"""Quadratic functionals of a stationary Gaussian process via truncated Toeplitz operators.

For a process with spectral density ``f`` and an even generator ``g``, the
centred functional ``Q_T = int int g^(t - s) X_t X_s`` over ``[0, T]^2``
lives in the second chaos.  Its cumulants are traces of powers of
``B_T(f) B_T(g)``, where ``B_T(psi)`` is the integral operator on ``[0, T]``
with kernel ``psi^(t - s)``.  Operators are discretized at the midpoints of
``m`` equal cells.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate as _spi
from scipy.linalg import toeplitz

from . import chaos2
from .chaos2 import Chaos2Spectrum
from .empirical import dkw_radius, kolmogorov_distance, ratio_curve, RatioPoint
from .numerics import IntegrationResult, RandomSource, _flagged, _quad_warnings, integrate
from .stein import normal_cdf

MAX_GRID = 3000
MAX_JMAX = 8
PSD_FLOOR = 1e-8
HAT_TOL = 1e-9
_PROBE = np.concatenate([np.linspace(0.0, 10.0, 201), np.geomspace(10.0, 1e4, 40)])


def fourier_transform(psi: Callable, t: float, tol: float = HAT_TOL) -> IntegrationResult:
    """``psi^(t) = int exp(i l t) psi(l) dl = 2 int_0^inf cos(l t) psi(l) dl`` for even ``psi``."""
    closed = getattr(psi, "fourier", None)
    if closed is not None:
        return closed(t, tol)
    t = abs(float(t))
    with _quad_warnings() as log:
        if t == 0.0:
            val, err = _spi.quad(psi, 0.0, math.inf, epsabs=tol / 2, epsrel=0.0, limit=500)[:2]
        else:
            val, err = _spi.quad(psi, 0.0, math.inf, weight="cos", wvar=t, epsabs=tol / 2,
                                 limlst=200, limit=500)[:2]
    flagged = _flagged(log)
    return IntegrationResult(2.0 * val, 2.0 * err, (2.0 * err <= tol) and not flagged)


class TabulatedFunction:
    """Even function given on ``0 <= l_0 < ... < l_K``; linear inside, power-law tail beyond.

    Past the last node the value is ``v_K (|l| / l_K)^(-tail_exponent)``.
    """

    def __init__(self, lams, values, tail_exponent: float, name: str = "tabulated"):
        lam = np.asarray(lams, dtype=float)
        val = np.asarray(values, dtype=float)
        if lam.ndim != 1 or lam.size < 2 or lam.shape != val.shape:
            raise ValueError(f"{name}: need at least two (lambda, value) rows")
        if lam[0] < 0 or np.any(np.diff(lam) <= 0):
            raise ValueError(f"{name}: lambda must be >= 0 and strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError(f"{name}: values must be finite")
        if tail_exponent <= 1:
            raise ValueError(f"{name}: tail exponent must exceed 1 for integrability")
        if lam[-1] <= 0:
            raise ValueError(f"{name}: last node must be positive")
        self.lams, self.values, self.tail_exponent, self.name = lam, val, float(tail_exponent), name

    def __call__(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        last, vlast = self.lams[-1], self.values[-1]
        with np.errstate(divide="ignore"):
            tail = vlast * (np.maximum(a, last) / last) ** (-self.tail_exponent)
        out = np.where(a <= last, np.interp(a, self.lams, self.values), tail)
        return out if out.ndim else float(out)

    def fourier(self, t: float, tol: float = HAT_TOL) -> IntegrationResult:
        """Exact transform of the linear pieces plus adaptive quadrature of the tail."""
        t = abs(float(t))
        lam, val = self.lams, self.values
        slope = np.diff(val) / np.diff(lam)
        a, b = lam[:-1], lam[1:]
        if t == 0.0:
            body = float(np.sum((val[:-1] + val[1:]) / 2 * (b - a)))
            # v (x/L)^-p integrated from L to infinity
            tail_val = val[-1] * lam[-1] / (self.tail_exponent - 1)
            return IntegrationResult(2.0 * (body + tail_val), 0.0, True)
        c0 = val[:-1] - slope * a

        def prim(x, c0, c1):
            return (c0 + c1 * x) * np.sin(t * x) / t + c1 * np.cos(t * x) / t**2

        body = float(np.sum(prim(b, c0, slope) - prim(a, c0, slope)))
        last, vlast, p = lam[-1], val[-1], self.tail_exponent
        with _quad_warnings() as log:
            tv, te = _spi.quad(lambda x: vlast * ((x + last) / last) ** (-p), 0.0, math.inf,
                               weight="cos", wvar=t, epsabs=tol / 4, limlst=200)[:2]
        # shift x -> x + last: cos(t(x + L)) = cos(tL)cos(tx) - sin(tL)sin(tx)
        with _quad_warnings() as log2:
            sv, se = _spi.quad(lambda x: vlast * ((x + last) / last) ** (-p), 0.0, math.inf,
                               weight="sin", wvar=t, epsabs=tol / 4, limlst=200)[:2]
        tail_val = math.cos(t * last) * tv - math.sin(t * last) * sv
        err = 2.0 * (te + se)
        flagged = _flagged(log) or _flagged(log2)
        return IntegrationResult(2.0 * (body + tail_val), err, err <= tol and not flagged)


def load_tabulated(path: str | Path, tail_exponent: float) -> TabulatedFunction:
    """Read a CSV with header ``lambda,value``."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["lambda", "value"]:
        raise ValueError(f"{path}: header must be 'lambda,value'")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError(f"{path}: every row needs exactly two columns")
    return TabulatedFunction(data[:, 0], data[:, 1], tail_exponent, name=str(path))


@dataclass
class SpectralPair:
    """Spectral density ``f`` and generator ``g``, both even.

    ``f_hat`` and ``g_hat`` are optional closed-form transforms; without them
    transforms are computed numerically and cached per lag.
    """

    name: str
    f: Callable
    g: Callable
    f_hat: Callable | None = None
    g_hat: Callable | None = None
    p: float = math.inf
    q: float = math.inf
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for label, fn in (("f", self.f), ("g", self.g)):
            pos = np.array([fn(float(x)) for x in _PROBE])
            neg = np.array([fn(-float(x)) for x in _PROBE])
            if not np.all(np.isfinite(pos)):
                raise ValueError(f"{self.name}: {label} is not finite on the probe grid")
            if np.max(np.abs(pos - neg)) > 1e-12:
                raise ValueError(f"{self.name}: {label} is not even")
            if label == "f" and np.min(pos) < 0:
                raise ValueError(f"{self.name}: spectral density must be nonnegative")
        if self.p < 1 or self.q < 1:
            raise ValueError("integrability exponents must be at least 1")

    @property
    def short_memory(self) -> bool:
        return 1.0 / self.p + 1.0 / self.q <= 0.5

    def hat(self, which: str, t: float) -> float:
        closed = self.f_hat if which == "f" else self.g_hat
        if closed is not None:
            return float(closed(t))
        key = (which, abs(float(t)))
        if key not in self._cache:
            r = fourier_transform(self.f if which == "f" else self.g, t)
            if not r.converged:
                raise ArithmeticError(f"{self.name}: transform of {which} at t={t} did not converge "
                                      f"(error {r.error:.3g})")
            self._cache[key] = r.value
        return self._cache[key]


def _cauchy(x):
    return 1.0 / (math.pi * (1.0 + np.asarray(x, dtype=float) ** 2))


def _gauss(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def zero_constant_root() -> float:
    """Real root of ``a^3 - a^2/2 + a/4 - 15/216``; makes ``int f^3 g^3`` vanish below."""
    roots = np.roots([1.0, -0.5, 0.25, -15.0 / 216.0])
    return float(roots[np.argmin(np.abs(roots.imag))].real)


def builtin_pairs() -> dict[str, Callable[[], SpectralPair]]:
    a = zero_constant_root()
    return {
        "cauchy-pair": lambda: SpectralPair(
            "cauchy-pair", _cauchy, _cauchy,
            lambda t: math.exp(-abs(t)), lambda t: math.exp(-abs(t)), math.inf, math.inf),
        "gaussian-pair": lambda: SpectralPair(
            "gaussian-pair", _gauss, _gauss,
            lambda t: math.exp(-t * t / 2), lambda t: math.exp(-t * t / 2), math.inf, math.inf),
        # g changes sign so that the third-order constant vanishes
        "zero-constant-pair": lambda: SpectralPair(
            "zero-constant-pair", _gauss,
            lambda x: (a - np.asarray(x, dtype=float) ** 2) * np.exp(-0.5 * np.asarray(x, dtype=float) ** 2),
            lambda t: math.exp(-t * t / 2),
            lambda t: math.sqrt(2 * math.pi) * (a - 1 + t * t) * math.exp(-t * t / 2),
            math.inf, math.inf),
    }


def get_pair(name: str) -> SpectralPair:
    try:
        return builtin_pairs()[name]()
    except KeyError:
        raise ValueError(f"unknown spectral pair {name!r}") from None


# --------------------------------------------------------------------------- operators

def _grid(T: float, m: int) -> float:
    if T <= 0:
        raise ValueError("horizon T must be positive")
    if not 1 <= m <= MAX_GRID:
        raise ValueError(f"grid size must be in [1, {MAX_GRID}]")
    return T / m


def operator_matrix(pair: SpectralPair, which: str, T: float, m: int) -> np.ndarray:
    """``h * [psi^(t_i - t_k)]``: the discretized ``B_T(psi)``; one transform per lag."""
    h = _grid(T, m)
    col = np.array([pair.hat(which, k * h) for k in range(m)])
    return toeplitz(col) * h


def _power_traces(a: np.ndarray, b: np.ndarray, jmax: int) -> dict[int, float]:
    prod = a @ b
    out, cur = {1: float(np.trace(prod))}, prod
    for j in range(2, jmax + 1):
        cur = cur @ prod
        out[j] = float(np.trace(cur))
    return out


@dataclass(frozen=True)
class AsymptoticConstants:
    integrals: dict[int, float]
    integral_errors: dict[int, float]
    converged: dict[int, bool]
    standardized: dict[int, float]
    raw: dict[int, float]
    sigma2_inf: float
    limit_constant: float
    limit_constant_edgeworth: float

    def raw_target(self, j: int, T: float) -> float:
        return T ** (1 - j / 2) * self.raw[j]


def product_integral(pair: SpectralPair, j: int, tol: float = 1e-12) -> IntegrationResult:
    fn = lambda x: float(pair.f(x)) ** j * float(pair.g(x)) ** j
    nodes = sorted({float(v) for h in (pair.f, pair.g) for v in getattr(h, "lams", ())})
    if not nodes:
        r = integrate(fn, [(0.0, math.inf)], tol / 2)
        return IntegrationResult(2 * r.value, 2 * r.error, r.converged, r.evaluations)
    # tabulated input: the interpolation kinks are passed as breakpoints
    last = nodes[-1]
    inner = [v for v in nodes if 0.0 < v < last]
    body = integrate(fn, [(0.0, last)], tol / 4, points=inner, limit=max(50, 2 * len(inner) + 50))
    tail = integrate(fn, [(last, math.inf)], tol / 4)
    return IntegrationResult(2 * (body.value + tail.value), 2 * (body.error + tail.error),
                             body.converged and tail.converged, body.evaluations + tail.evaluations)


def asymptotic_constants(pair: SpectralPair, jmax: int = 4) -> AsymptoticConstants:
    """Large-``T`` constants from the integrals ``I_j = int f^j g^j``.

    ``standardized[j]`` is the limit of ``T^(j/2 - 1)`` times the ``j``-th
    cumulant of the unit-variance functional, ``raw[j]`` the same for the
    ``T^(-1/2)``-scaled functional.  ``limit_constant`` is
    ``sqrt(2/3) I_3 / I_2^(3/2)``, the coefficient quoted in the literature for
    ``sqrt(T)(P(Q <= z) - Phi(z)) -> C (1 - z^2) exp(-z^2/2)``;
    ``limit_constant_edgeworth`` is the coefficient obtained by feeding the
    cumulant asymptotics into the one-term Edgeworth expansion, which gives
    ``sqrt(2)/3 I_3 / I_2^(3/2)``.  Both are reported; see the README.
    """
    if not 3 <= jmax <= MAX_JMAX:
        raise ValueError(f"jmax must be in [3, {MAX_JMAX}]")
    ints, errs, ok = {}, {}, {}
    for j in range(2, jmax + 1):
        r = product_integral(pair, j)
        ints[j], errs[j], ok[j] = r.value, r.error, r.converged and math.isfinite(r.value)
    sigma2 = 16 * math.pi**3 * ints[2]
    raw = {j: chaos2.cumulant_coefficient(j) * (2 * math.pi) ** (2 * j - 1) * ints[j] for j in ints}
    std = {j: raw[j] / sigma2 ** (j / 2) for j in raw}
    shape = ints[3] / ints[2] ** 1.5
    return AsymptoticConstants(ints, errs, ok, std, raw, sigma2, math.sqrt(2 / 3) * shape,
                               math.sqrt(2) / 3 * shape)


@dataclass(frozen=True)
class ToeplitzReport:
    pair: str
    T: float
    m: int
    cumulants: dict[int, float]
    standardized: dict[int, float]
    sigma2_T: float
    asymptotic: AsymptoticConstants | None

    def scaled_standardized(self, j: int) -> float:
        """``T^(j/2 - 1)`` times the standardized cumulant; tends to ``asymptotic.standardized[j]``."""
        return self.T ** (j / 2 - 1) * self.standardized[j]


def toeplitz_cumulants(pair: SpectralPair, T: float, m: int, jmax: int = 4,
                       with_asymptotics: bool = True) -> ToeplitzReport:
    """Cumulants of ``T^(-1/2)(Q_T - E Q_T)`` from traces of ``(B_T(f) B_T(g))^j``."""
    if not 2 <= jmax <= MAX_JMAX:
        raise ValueError(f"jmax must be in [2, {MAX_JMAX}]")
    bf = operator_matrix(pair, "f", T, m)
    bg = operator_matrix(pair, "g", T, m)
    tr = _power_traces(bf, bg, jmax)
    cum = {1: 0.0}
    for j in range(2, jmax + 1):
        cum[j] = T ** (-j / 2) * chaos2.cumulant_coefficient(j) * tr[j]
    s2 = cum[2]
    std = {1: 0.0}
    for j in range(2, jmax + 1):
        std[j] = cum[j] / s2 ** (j / 2) if s2 > 0 else 0.0
    asym = asymptotic_constants(pair, max(jmax, 3)) if with_asymptotics else None
    return ToeplitzReport(pair.name, float(T), m, cum, std, s2, asym)


def chaos2_embedding(pair: SpectralPair, T: float, m: int) -> Chaos2Spectrum:
    """Second-chaos spectrum of ``T^(-1/2)(Q_T - E Q_T)`` on the grid.

    With ``Cov(X) = S`` and generator matrix ``G``, the discretized form
    ``h^2 X^T G X`` has eigen-coefficients equal to those of
    ``h^2 S^(1/2) G S^(1/2)``.
    """
    h = _grid(T, m)
    s = operator_matrix(pair, "f", T, m) / h
    g = operator_matrix(pair, "g", T, m) / h
    w, v = np.linalg.eigh(s)
    top = float(np.max(np.abs(w))) if w.size else 0.0
    if w.min() < -PSD_FLOOR * top:
        raise ValueError(f"{pair.name}: covariance matrix is indefinite, smallest eigenvalue "
                         f"{w.min():.3g} (floor {-PSD_FLOOR * top:.3g})")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    m2 = h * h * root @ g @ root
    lam = np.linalg.eigvalsh((m2 + m2.T) / 2)
    return Chaos2Spectrum(lam / math.sqrt(T), h)


@dataclass(frozen=True)
class ToeplitzRateReport:
    T: float
    n: int
    phi: float
    kappa3: float
    d_kol: float
    dkw: float
    ratio_to_phi: float
    root_T_distance: float
    root_T_gap_at_zero: float
    root_T_gap_se: float
    ratios: list[RatioPoint]
    underpowered: bool


def toeplitz_rate_report(pair: SpectralPair, T: float, m: int, src: RandomSource, n: int,
                         z_grid=(-2.0, -1.0, 0.0, 1.0, 2.0), workers: int = 1,
                         delta: float = 0.01) -> ToeplitzRateReport:
    """Sample the standardized functional exactly in law and compare with the Stein bound."""
    if n < 1:
        raise ValueError("n must be positive")
    std_spec = chaos2.standardize(chaos2_embedding(pair, T, m))
    rep = chaos2.normal_approx_report(std_spec)
    x = np.sort(chaos2.sample(std_spec, src, n, workers))
    d = kolmogorov_distance(x, presorted=True)
    r = dkw_radius(n, delta)
    p0 = np.searchsorted(x, 0.0, side="right") / n
    rho = rep.rho if rep.rho is not None else 0.0
    curve = ratio_curve(x, rep.phi, z_grid, rho, presorted=True) if rep.phi > 0 else []
    rt = math.sqrt(T)
    return ToeplitzRateReport(float(T), n, rep.phi, rep.kappa3, d, r,
                              d / rep.phi if rep.phi > 0 else math.inf, rt * d,
                              rt * (p0 - float(normal_cdf(0.0))), rt * 0.5 / math.sqrt(n),
                              curve, r > rep.phi / 3)
