"""Hermite functionals of fractional Gaussian noise.

``Z_T = (sigma(T) sqrt(T))^-1 int_0^T H_q(B_{u+1} - B_u) du`` for a
fractional Brownian motion ``B`` with Hurst index ``H <= 1/2`` and even
``q``.  This module provides the increment covariance ``rho``, the variance
and limit constants by quadrature, exact simulation of the increment field on
a mesh, and the Monte Carlo check of the first-order correction
``sqrt(T)(P(Z_T <= z) - Phi(z)) -> (gamma/3)(z^2 - 1) pdf(z)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from . import chaos2
from .chaos2 import Chaos2Spectrum
from .empirical import kolmogorov_distance
from .numerics import IntegrationResult, RandomSource, integrate, sample_chunks
from .stein import hermite, normal_cdf, normal_pdf

TAIL_THRESHOLD = 1e-12
MAX_FIELD = 8000
PSD_FLOOR = 1e-8
_BLOCK_ENTRIES = 2**21


@dataclass(frozen=True)
class FbmModel:
    H: float
    q: int
    T: float
    delta: float = 0.25

    def __post_init__(self):
        if not 0 < self.H <= 0.5:
            raise ValueError("Hurst index must lie in (0, 1/2]")
        if int(self.q) != self.q or self.q < 2 or self.q % 2:
            raise ValueError("q must be an even integer >= 2")
        if self.q > 10:
            raise ValueError("q above 10 is not supported")
        if self.T <= 0 or self.delta <= 0:
            raise ValueError("T and delta must be positive")
        steps = self.T / self.delta
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("T must be an integer multiple of delta")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.delta))


def fbm_rho(H: float, x):
    """Covariance of unit increments: ``(|x+1|^2H + |x-1|^2H - 2|x|^2H) / 2``.

    For ``|x| > 2`` the second difference is evaluated through ``expm1`` and
    ``log1p`` to avoid cancellation in the tail.
    """
    if not 0 < H < 1:
        raise ValueError("Hurst index must lie in (0, 1)")
    if np.ndim(x) == 0:
        return _rho_scalar(H, float(x))
    x = np.abs(np.asarray(x, dtype=float))
    h2 = 2 * H
    near = 0.5 * ((x + 1) ** h2 + np.abs(x - 1) ** h2 - 2 * x**h2)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = 1.0 / np.maximum(x, 2.0)
        far = 0.5 * x**h2 * (np.expm1(h2 * np.log1p(u)) + np.expm1(h2 * np.log1p(-u)))
    return np.where(x > 2, far, near)


def _rho_scalar(H: float, x: float) -> float:
    x = abs(x)
    h2 = 2 * H
    if x > 2:
        u = 1.0 / x
        return 0.5 * x**h2 * (math.expm1(h2 * math.log1p(u)) + math.expm1(h2 * math.log1p(-u)))
    return 0.5 * ((x + 1) ** h2 + abs(x - 1) ** h2 - 2 * x**h2)


def truncation_radius(H: float, q: int, threshold: float = TAIL_THRESHOLD) -> float:
    """Radius beyond which ``|rho|^q < threshold``; ``rho`` vanishes past 1 when ``H = 1/2``."""
    if H == 0.5:
        return 1.0
    g = lambda x: q * math.log(abs(_rho_scalar(H, x)) + 1e-300) - math.log(threshold)
    hi = 4.0
    while g(hi) > 0:
        hi *= 2
    return brentq(g, hi / 2 if g(hi / 2) > 0 else 2.0, hi, xtol=1e-6)


@dataclass(frozen=True)
class VarianceConstants:
    sigma2_T: float
    sigma2_inf: float
    radius: float
    errors: tuple[float, float]
    converged: bool


def _rho_points(H: float, lo: float, hi: float, shifts=(0.0,)) -> list[float]:
    pts = {s + k for s in shifts for k in (-1.0, 0.0, 1.0)}
    return sorted(p for p in pts if lo < p < hi)


def variance_constants(model: FbmModel, tol: float = 1e-11) -> VarianceConstants:
    """``sigma^2(T) = 2 q! int_0^T (1 - x/T) rho^q`` and ``sigma^2(inf) = 2 q! int_0^R rho^q``."""
    H, q, T = model.H, model.q, model.T
    fq = math.factorial(q)
    R = truncation_radius(H, q)
    a = integrate(lambda x: (1 - x / T) * _rho_scalar(H, x) ** q, [(0.0, T)], tol / (2 * fq),
                  points=_rho_points(H, 0.0, T), limit=2000)
    b = integrate(lambda x: _rho_scalar(H, x) ** q, [(0.0, R)], tol / (2 * fq),
                  points=_rho_points(H, 0.0, R), limit=2000)
    return VarianceConstants(2 * fq * a.value, 2 * fq * b.value, R,
                             (2 * fq * a.error, 2 * fq * b.error), a.converged and b.converged)


def sigma2_direct(model: FbmModel, tol: float = 1e-10) -> IntegrationResult:
    """``(q!/T) int int_{[0,T]^2} rho^q(u - v)`` by iterated 2-d quadrature (small ``T`` only)."""
    H, q, T = model.H, model.q, model.T
    c = math.factorial(q) / T
    inner = lambda u: integrate(lambda v: _rho_scalar(H, u - v) ** q, [(0.0, T)], tol / (4 * c * T),
                                points=_rho_points(H, 0.0, T, (u,))).value
    r = integrate(inner, [(0.0, T)], tol / (2 * c), points=list(np.arange(1.0, T)))
    return IntegrationResult(c * r.value, c * r.error, r.converged)


# --------------------------------------------------------------------------- limit constants

def gamma_prefactor(q: int) -> int:
    """Integer ``q! (q/2)! C(q, q/2)^2 / 2``."""
    num = math.factorial(q) * math.factorial(q // 2) * math.comb(q, q // 2) ** 2
    assert num % 2 == 0
    return num // 2


def sigma_hat_weight(q: int, s: int) -> int:
    return math.factorial(s - 1) ** 2 * math.comb(q - 1, s - 1) ** 4 * math.factorial(2 * q - 2 * s)


class _Autocorrelation:
    """``A_a(d) = int rho^a(x) rho^a(x + d) dx`` with ``rho`` set to 0 beyond ``R``."""

    def __init__(self, H: float, a: int, R: float, tol: float):
        self.H, self.a, self.R, self.tol = H, a, R, tol
        self.calls = 0
        self.ok = True
        self.err = 0.0

    def __call__(self, d: float) -> float:
        d = abs(d)
        lo, hi = -self.R, self.R - d
        if hi <= lo:
            return 0.0
        H, a = self.H, self.a
        r = integrate(lambda x: _rho_scalar(H, x) ** a * _rho_scalar(H, x + d) ** a, [(lo, hi)],
                      self.tol, points=_rho_points(H, lo, hi, (0.0, -d)), limit=1000)
        self.calls += 1
        self.ok = self.ok and r.converged
        self.err = max(self.err, r.error)
        return r.value


@dataclass(frozen=True)
class BreuerMajorConstants:
    H: float
    q: int
    radius: float
    sigma2_T: float
    sigma2_inf: float
    integrals: dict[int, float]
    sigma_hat_s2: dict[int, float]
    sigma_hat2: float
    triple_product: float
    gamma_hat: float
    curve_coefficient: float
    errors: dict[str, float] = field(default_factory=dict)
    converged: bool = True

    @property
    def alpha_limit(self) -> float:
        """Limit of ``kappa_3 / phi`` implied by the constants (``-2 gamma / sigma_hat``)."""
        return -2.0 * self.gamma_hat / math.sqrt(self.sigma_hat2)

    def predicted(self, z):
        z = np.asarray(z, dtype=float)
        return self.curve_coefficient * (z * z - 1) * np.asarray(normal_pdf(z))


def limit_constants(model: FbmModel, tol: float = 1e-9, radius: float | None = None) -> BreuerMajorConstants:
    """The constants of the first-order correction.

    ``integrals[s]`` is ``int A_s(d) A_{q-s}(d) dd``, the reduced form of the
    triple integral of ``rho^s rho^s rho^(q-s) rho^(q-s)``;
    ``sigma_hat_s2[s] = (2q-2s)! integrals[s]``;  ``triple_product`` is
    ``int int rho^(q/2)(x) rho^(q/2)(y) rho^(q/2)(x-y)``.  Combinatorial
    prefactors are integers until the final multiply.
    """
    H, q = model.H, model.q
    if H > 0.5:
        raise ValueError("limit constants need H <= 1/2")
    R = truncation_radius(H, q) if radius is None else float(radius)
    var = variance_constants(model)
    s2 = var.sigma2_inf
    auto: dict[int, _Autocorrelation] = {}

    def A(a: int) -> _Autocorrelation:
        if a not in auto:
            auto[a] = _Autocorrelation(H, a, R, tol / 100)
        return auto[a]

    dpts = [1.0, 2.0]
    ints: dict[int, float] = {}
    errs: dict[str, float] = {}
    ok = var.converged
    for s in range(1, q):
        if q - s in ints:
            ints[s] = ints[q - s]
            continue
        fa, fb = A(s), A(q - s)
        r = integrate(lambda d: fa(d) * fb(d), [(0.0, 2 * R)], tol / 2,
                      points=[p for p in dpts if p < 2 * R], limit=1000)
        ints[s] = 2 * r.value
        errs[f"J{s}"] = 2 * r.error
        ok = ok and r.converged
    c = q // 2
    fc = A(c)
    r = integrate(lambda x: _rho_scalar(H, x) ** c * fc(x), [(0.0, R)], tol / 2,
                  points=[p for p in dpts if p < R], limit=1000)
    triple = 2 * r.value
    errs["triple"] = 2 * r.error
    ok = ok and r.converged and all(a.ok for a in auto.values())
    per_s = {s: math.factorial(2 * q - 2 * s) * ints[s] for s in ints}
    weighted = sum(sigma_hat_weight(q, s) * ints[s] for s in ints)
    sigma_hat2 = q * q * weighted / s2**2
    gamma = -gamma_prefactor(q) * triple / s2**1.5
    return BreuerMajorConstants(H, q, R, var.sigma2_T, s2, ints, per_s, sigma_hat2, triple,
                                gamma, gamma / 3.0, errs, ok)


@dataclass(frozen=True)
class StabilityCheck:
    base: BreuerMajorConstants
    doubled: BreuerMajorConstants

    def relative_change(self, name: str) -> float:
        a, b = getattr(self.base, name), getattr(self.doubled, name)
        return abs(a - b) / abs(b)

    def stable(self, digits: int = 4) -> bool:
        lim = 0.5 * 10 ** (-digits)
        return all(self.relative_change(n) <= lim for n in ("sigma_hat2", "gamma_hat"))


def truncation_stability(model: FbmModel, tol: float = 1e-9) -> StabilityCheck:
    R = truncation_radius(model.H, model.q)
    return StabilityCheck(limit_constants(model, tol, R), limit_constants(model, tol, 2 * R))


# --------------------------------------------------------------------------- simulation

def increment_covariance(H: float, delta: float, n: int) -> np.ndarray:
    from scipy.linalg import toeplitz
    return toeplitz(fbm_rho(H, np.arange(n) * delta))


@lru_cache(maxsize=8)
def _field_factor(H: float, delta: float, n: int) -> np.ndarray:
    c = increment_covariance(H, delta, n)
    w, v = np.linalg.eigh(c)
    top = float(np.max(np.abs(w)))
    if w.min() < -PSD_FLOOR * top:
        raise ValueError(f"increment covariance indefinite (smallest eigenvalue {w.min():.3g}); "
                         "the mesh is too fine for double precision")
    f = v * np.sqrt(np.clip(w, 0.0, None))
    f.setflags(write=False)
    return f


def field_size(model: FbmModel) -> int:
    return model.steps


def _check_field(model: FbmModel) -> int:
    n = model.steps
    if n + int(round(1 / model.delta)) > MAX_FIELD:
        raise ValueError(f"field of {n} points exceeds the dense budget {MAX_FIELD}")
    return n


def simulate_increment_field(model: FbmModel, src: RandomSource, replicas: int = 1) -> np.ndarray:
    """Rows of ``B_{u_i + 1} - B_{u_i}`` at ``u_i = i delta``, ``i < T/delta``; shape ``(replicas, N)``."""
    n = _check_field(model)
    f = _field_factor(model.H, model.delta, n)
    z = src.normals(replicas * n).reshape(replicas, n)
    return z @ f.T


def discrete_sigma2(model: FbmModel) -> float:
    """Exact variance of ``T^-1/2 delta sum_i H_q(X_i)`` on the mesh."""
    n = model.steps
    r = fbm_rho(model.H, np.arange(n) * model.delta) ** model.q
    weights = np.concatenate([[n], 2 * (n - np.arange(1, n))])
    return math.factorial(model.q) * model.delta**2 * float(weights @ r) / model.T


def zt_spectrum(model: FbmModel, sigma2_T: float | None = None) -> Chaos2Spectrum:
    """For ``q = 2``: second-chaos spectrum of the mesh version of ``Z_T``."""
    if model.q != 2:
        raise ValueError("the quadratic-form spectrum exists for q = 2 only")
    n = _check_field(model)
    s2 = variance_constants(model).sigma2_T if sigma2_T is None else sigma2_T
    c = model.delta / math.sqrt(s2 * model.T)
    return Chaos2Spectrum(c * np.linalg.eigvalsh(increment_covariance(model.H, model.delta, n)),
                          model.delta)


def _zt_draw(model: FbmModel, sigma2_T: float, with_derivative: bool):
    n = _check_field(model)
    f = _field_factor(model.H, model.delta, n)
    cov = increment_covariance(model.H, model.delta, n) if with_derivative else None
    c = model.delta / math.sqrt(sigma2_T * model.T)
    rows = max(1, _BLOCK_ENTRIES // n)
    q = model.q

    def draw(src: RandomSource, size: int) -> np.ndarray:
        out = []
        it = src.iter_normals(size * n, block=rows * n)
        done = 0
        while done < size:
            k = min(rows, size - done)
            x = next(it).reshape(k, n) @ f.T
            z = c * np.sum(hermite(q, x), axis=1)
            if with_derivative:
                # q = 2: ||DZ||^2 = 4 c^2 X^T C X
                half_norm = 2 * c * c * np.einsum("ij,ij->i", x @ cov, x)
                out.append(np.column_stack([z, half_norm]))
            else:
                out.append(z[:, None])
            done += k
        return np.concatenate(out).ravel()

    return draw


def sample_ZT(model: FbmModel, src: RandomSource, n: int, workers: int = 1,
              sigma2_T: float | None = None) -> np.ndarray:
    """``n`` draws of ``delta sum_i H_q(X_i) / (sigma(T) sqrt(T))``."""
    if n < 1:
        raise ValueError("n must be positive")
    s2 = variance_constants(model).sigma2_T if sigma2_T is None else sigma2_T
    return sample_chunks(src, n, _zt_draw(model, s2, False), workers)


@dataclass(frozen=True)
class LimitPoint:
    T: float
    z: float
    measured: float
    se: float
    predicted: float
    underpowered: bool


@dataclass(frozen=True)
class HorizonResult:
    T: float
    n: int
    sigma2_T: float
    discrete_variance_ratio: float
    mean: float
    variance: float
    root_T_distance: float
    points: list[LimitPoint]
    covariance: float | None = None
    covariance_se: float | None = None
    derivative_variance: float | None = None


@dataclass(frozen=True)
class LimitVerification:
    constants: BreuerMajorConstants
    horizons: list[HorizonResult]

    def distance_ratio(self) -> float:
        v = [h.root_T_distance for h in self.horizons]
        return max(v) / min(v)


def verify_limit(models: list[FbmModel], src: RandomSource, n: int, z_grid=(-2.0, -1.0, 0.0, 1.0, 2.0),
                 workers: int = 1, constants: BreuerMajorConstants | None = None,
                 covariance: bool = True) -> LimitVerification:
    """Measured ``sqrt(T)(P(Z_T <= z) - Phi(z))`` across horizons against the limit curve.

    All models must share ``H`` and ``q``.  Each horizon uses its own child
    stream ``src.spawn(i)``.  For ``q = 2`` and ``covariance=True`` the draws
    also give ``E[Z sqrt(T)(||DZ||^2/2 - 1)]``, which tends to ``-gamma``, and
    the variance of ``sqrt(T)(||DZ||^2/2 - 1)``, which tends to ``sigma_hat^2``.
    """
    if not models:
        raise ValueError("need at least one horizon")
    if len({(m.H, m.q) for m in models}) != 1:
        raise ValueError("all horizons must share H and q")
    if n < 1:
        raise ValueError("n must be positive")
    const = constants if constants is not None else limit_constants(models[0])
    z = np.asarray(z_grid, dtype=float)
    pred = const.predicted(z)
    out = []
    for i, m in enumerate(models):
        s2 = variance_constants(m).sigma2_T
        with_d = covariance and m.q == 2
        flat = sample_chunks(src.spawn(i), n, _zt_draw(m, s2, with_d), workers)
        cols = flat.reshape(n, 2 if with_d else 1)
        x = np.sort(cols[:, 0])
        rt = math.sqrt(m.T)
        p = np.asarray(normal_cdf(z))
        emp = np.searchsorted(x, z, side="right") / n
        se = rt * np.sqrt(p * (1 - p) / n)
        pts = [LimitPoint(m.T, float(a), float(rt * (e - pp)), float(s), float(pr),
                          bool(pr != 0 and s > 0.5 * abs(pr)))
               for a, e, pp, s, pr in zip(z, emp, p, se, pred)]
        cov = cov_se = dvar = None
        if with_d:
            zz = cols[:, 0]
            g = rt * (cols[:, 1] - 1.0)
            prod = zz * g
            cov = float(prod.mean())
            cov_se = float(prod.std(ddof=1) / math.sqrt(n))
            dvar = float(g.var(ddof=1))
        out.append(HorizonResult(m.T, n, s2, discrete_sigma2(m) / s2, float(x.mean()),
                                 float(x.var(ddof=1)), rt * kolmogorov_distance(x, presorted=True),
                                 pts, cov, cov_se, dvar))
    return LimitVerification(const, out)


@dataclass(frozen=True)
class MeshLevel:
    delta: float
    variance_ratio: float
    kappa3: float | None
    phi: float | None


def mesh_halving(model: FbmModel, levels: int = 3) -> list[MeshLevel]:
    """Riemann bias of the mesh at ``delta, delta/2, ...``.

    Reports the exact mesh variance relative to ``sigma^2(T)``, and for
    ``q = 2`` also ``kappa_3`` and ``phi`` of the mesh quadratic form.
    """
    if levels < 1:
        raise ValueError("levels must be positive")
    s2 = variance_constants(model).sigma2_T
    out = []
    for k in range(levels):
        m = FbmModel(model.H, model.q, model.T, model.delta / 2**k)
        k3 = phi = None
        if m.q == 2:
            rep = chaos2.normal_approx_report(zt_spectrum(m, s2))
            k3, phi = rep.kappa3, rep.phi
        out.append(MeshLevel(m.delta, discrete_sigma2(m) / s2, k3, phi))
    return out
