"""Second Wiener chaos: spectra, cumulants, the Stein bound and exact sampling.

An element ``F = I_2(f)`` has the law of ``sum_j lambda_j (xi_j^2 - 1)`` where
``lambda_j`` are the eigenvalues of the kernel operator ``g -> f (x)_1 g``.
Everything here is driven by that finite list of eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import RandomSource, eigenvalues_symmetric, sample_chunks
from .stein import normal_cdf, normal_pdf, phi_cdf_derivative
from .tensor import GridTensor

MIN_VARIANCE = 1e-14
_BLOCK_ENTRIES = 2**21


def cumulant_coefficient(p: int) -> int:
    return 2 ** (p - 1) * math.factorial(p - 1)


@dataclass(frozen=True)
class Chaos2Spectrum:
    eigenvalues: np.ndarray
    h: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.eigenvalues, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("eigenvalues must be finite")
        order = np.argsort(-np.abs(v), kind="stable")
        object.__setattr__(self, "eigenvalues", v[order])

    def __len__(self) -> int:
        return self.eigenvalues.size

    def scaled(self, c: float) -> "Chaos2Spectrum":
        return Chaos2Spectrum(c * self.eigenvalues, self.h)


def spectrum(f: GridTensor, method: str = "lapack") -> Chaos2Spectrum:
    """Eigenvalues of ``h * F`` for a symmetric order-2 kernel ``F``."""
    if f.order != 2:
        raise ValueError("second-chaos spectrum needs an order-2 kernel")
    if not f.symmetric:
        raise ValueError("kernel must be symmetric")
    return Chaos2Spectrum(eigenvalues_symmetric(f.h * f.values, method, name="kernel operator"), f.h)


def cumulant(s: Chaos2Spectrum, p: int) -> float:
    if p < 1:
        raise ValueError("cumulant order must be positive")
    if p == 1:
        return 0.0
    return float(cumulant_coefficient(p) * np.sum(s.eigenvalues**p))


def cumulant_trace(f: GridTensor, p: int) -> float:
    """Cross-check route: ``2^(p-1) (p-1)! Tr((hF)^p)``."""
    if p < 1:
        raise ValueError("cumulant order must be positive")
    if p == 1:
        return 0.0
    a = f.h * f.values
    return float(cumulant_coefficient(p) * np.trace(np.linalg.matrix_power(a, p)))


def standardize(s: Chaos2Spectrum) -> Chaos2Spectrum:
    """Rescale so that the variance ``kappa_2`` equals one."""
    k2 = cumulant(s, 2)
    if k2 < MIN_VARIANCE:
        raise ValueError(f"variance {k2:.3g} too small to standardize")
    return s.scaled(1.0 / math.sqrt(k2))


@dataclass(frozen=True)
class NormalApproxReport:
    kappa2: float
    kappa3: float
    kappa4: float
    kappa8: float
    phi: float
    kolmogorov_bound: float
    alpha: float | None
    eighth_ratio: float | None
    edgeworth_coefficient: float

    @property
    def rho(self) -> float | None:
        """Limit correlation implied by ``alpha``; equals ``-alpha / 2``."""
        return None if self.alpha is None else -self.alpha / 2.0


def normal_approx_report(s: Chaos2Spectrum) -> NormalApproxReport:
    k2, k3, k4, k8 = (cumulant(s, p) for p in (2, 3, 4, 8))
    phi = math.sqrt(max(k4, 0.0) / 6.0 + (k2 - 1.0) ** 2)
    alpha = k3 / phi if phi > 0 else None
    eighth = k8 / phi**4 if phi > 0 else None
    return NormalApproxReport(k2, k3, k4, k8, phi, phi, alpha, eighth, -k3 / 6.0)


def limit_curve(alpha: float, z):
    """Predicted limit of ``(P(F <= z) - Phi(z)) / phi``."""
    z = np.asarray(z, dtype=float)
    out = alpha / 6.0 * (1.0 - z * z) * np.asarray(normal_pdf(z))
    return out if out.ndim else float(out)


def edgeworth_cdf(report: NormalApproxReport, z):
    """One-term Edgeworth approximation ``Phi(z) - (kappa_3/6) Phi'''(z)``."""
    z = np.asarray(z, dtype=float)
    out = np.asarray(normal_cdf(z)) + report.edgeworth_coefficient * np.asarray(phi_cdf_derivative(3, z))
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------- sampling

def _squared_normal_rows(src: RandomSource, rows: int, m: int):
    """Yield blocks of shape (k, m) of squared standard normals, row-major from one stream."""
    per = max(1, _BLOCK_ENTRIES // m)
    it = src.iter_normals(rows * m, block=per * m)
    done = 0
    while done < rows:
        k = min(per, rows - done)
        z = next(it).reshape(k, m)
        yield z * z
        done += k


def _draw_chaos2(lam: np.ndarray):
    shift = float(lam.sum())

    def draw(src: RandomSource, size: int) -> np.ndarray:
        if lam.size == 0:
            return np.zeros(size)
        return np.concatenate([sq @ lam - shift for sq in _squared_normal_rows(src, size, lam.size)])

    return draw


def sample(s: Chaos2Spectrum, src: RandomSource, n: int, workers: int = 1) -> np.ndarray:
    """``n`` independent draws of ``sum_j lambda_j (xi_j^2 - 1)`` using every eigenvalue."""
    return sample_chunks(src, n, _draw_chaos2(s.eigenvalues), workers)


@dataclass(frozen=True)
class MomentCheck:
    s: int
    lhs: float
    rhs: float
    lhs_se: float
    rhs_se: float
    diff_se: float
    n: int

    @property
    def z_score(self) -> float:
        d = self.lhs - self.rhs
        if self.diff_se == 0.0:
            return 0.0 if d == 0.0 else math.inf
        return d / self.diff_se


def malliavin_moment_check(s: Chaos2Spectrum, src: RandomSource, n: int, s_exp: int,
                           workers: int = 1) -> MomentCheck:
    """Monte Carlo check of ``E(F^s ||DF||^2) = (2 / (s + 1)) E(F^(s+2))``.

    ``||DF||^2`` is ``sum_j 4 lambda_j^2 xi_j^2`` in eigen-coordinates.  Both
    sides use the same draws; ``diff_se`` is the standard error of the paired
    difference, which is the relevant scale for the comparison.
    """
    if s_exp not in (0, 1, 2, 3):
        raise ValueError("s_exp must be in {0, 1, 2, 3}")
    if n < 10**5:
        raise ValueError("moment check needs at least 1e5 draws")
    lam = s.eigenvalues
    shift = float(lam.sum())
    lam2 = 4.0 * lam * lam

    def draw(sub: RandomSource, size: int) -> np.ndarray:
        out = []
        for sq in _squared_normal_rows(sub, size, max(lam.size, 1)):
            if lam.size == 0:
                out.append(np.zeros((sq.shape[0], 2)))
                continue
            f = sq @ lam - shift
            d = sq @ lam2
            out.append(np.column_stack([f**s_exp * d, 2.0 / (s_exp + 1) * f ** (s_exp + 2)]))
        return np.concatenate(out)

    # two columns per draw: flatten through the chunk helper, then reshape
    flat = sample_chunks(src, n, lambda sub, k: draw(sub, k).ravel(), workers)
    pairs = flat.reshape(n, 2)
    a, b = pairs[:, 0], pairs[:, 1]
    root = math.sqrt(n)
    return MomentCheck(s_exp, float(a.mean()), float(b.mean()), float(a.std(ddof=1) / root),
                       float(b.std(ddof=1) / root), float((a - b).std(ddof=1) / root), n)
