"""Numerical substrate: symmetric eigensolvers, quadrature and seeded Gaussian streams."""

from __future__ import annotations

import math
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import integrate as _spi
from scipy.special import ndtri
from scipy.stats import qmc

MAX_EIGEN_DIM = 5000
JACOBI_MAX_SWEEPS = 60


class EigenConvergenceError(RuntimeError):
    """Raised when the Jacobi sweep budget is exhausted."""


@dataclass(frozen=True)
class IntegrationResult:
    value: float
    error: float
    converged: bool
    evaluations: int = 0

    def __float__(self) -> float:
        return self.value


def as_symmetric(m, name: str = "matrix") -> np.ndarray:
    """Return a symmetric copy of ``m`` built from its lower triangle."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"{name}: expected a non-empty square matrix, got shape {a.shape}")
    lower = np.tril(a)
    return lower + np.tril(a, -1).T


def _order_by_magnitude(vals: np.ndarray, vecs: np.ndarray | None = None):
    order = np.argsort(-np.abs(vals), kind="stable")
    if vecs is None:
        return vals[order]
    return vals[order], vecs[:, order]


def jacobi_eigh(m, name: str = "matrix", tol: float = 1e-14,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi rotations for a dense symmetric matrix.

    Returns eigenvalues and the matrix of eigenvectors (as columns), in the
    solver's natural order.  Each rotation is applied with vectorized row and
    column updates, so the cost per sweep is O(n^3) with a small constant.
    """
    a = as_symmetric(m, name)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return np.diag(a).copy(), v
    # entries below this never need rotating: together they stay under tol * scale
    skip = 0.1 * tol * scale / n
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise EigenConvergenceError(
        f"{name}: Jacobi iteration did not converge after {max_sweeps} sweeps (dim={n})"
    )


def eigh_symmetric(m, method: str = "lapack", name: str = "matrix"):
    """Eigenvalues and eigenvectors, ordered by decreasing absolute value.

    ``method="lapack"`` uses the divide-and-conquer driver behind
    :func:`numpy.linalg.eigh`; ``method="jacobi"`` uses :func:`jacobi_eigh`.
    Only the lower triangle of ``m`` is read.
    """
    a = as_symmetric(m, name)
    if a.shape[0] > MAX_EIGEN_DIM:
        raise ValueError(f"{name}: dimension {a.shape[0]} exceeds limit {MAX_EIGEN_DIM}")
    if method == "lapack":
        try:
            vals, vecs = np.linalg.eigh(a)
        except np.linalg.LinAlgError as exc:
            raise EigenConvergenceError(f"{name}: {exc}") from exc
    elif method == "jacobi":
        vals, vecs = jacobi_eigh(a, name=name)
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    return _order_by_magnitude(vals, vecs)


def eigenvalues_symmetric(m, method: str = "lapack", name: str = "matrix") -> np.ndarray:
    """Eigenvalues of a symmetric matrix, sorted by decreasing ``|lambda|``.

    Tiny eigenvalues are returned as computed; no truncation is applied.
    """
    a = as_symmetric(m, name)
    if a.shape[0] > MAX_EIGEN_DIM:
        raise ValueError(f"{name}: dimension {a.shape[0]} exceeds limit {MAX_EIGEN_DIM}")
    if method == "lapack":
        try:
            vals = np.linalg.eigvalsh(a)
        except np.linalg.LinAlgError as exc:
            raise EigenConvergenceError(f"{name}: {exc}") from exc
        return _order_by_magnitude(vals)
    return eigh_symmetric(a, method=method, name=name)[0]


# --------------------------------------------------------------------------- quadrature

Box = Sequence[tuple[float, float]]


def integrate(f: Callable, domain: Box, tol: float = 1e-10, *,
              points: Sequence[float] | None = None, method: str = "auto",
              max_points: int = 2**22, limit: int = 500, seed: int = 0) -> IntegrationResult:
    """Integrate ``f`` over a box in one to three dimensions.

    Parameters
    ----------
    f : callable
        Scalar integrand.  In 1D it is called as ``f(x)``; in higher
        dimensions as ``f(x, y[, z])``.  For ``method="qmc"`` it must accept
        arrays of coordinates and return an array.
    domain : sequence of (low, high)
        One pair per dimension.  Infinite bounds are allowed in 1D.
    tol : float
        Absolute error target.
    points : sequence of float, optional
        Breakpoints (1D only) where the integrand is not smooth.
    method : {"auto", "adaptive", "iterated", "qmc"}
        ``auto`` picks adaptive Gauss-Kronrod in 1D and iterated adaptive
        quadrature in 2-3D.  ``qmc`` uses scrambled Sobol points, doubling
        the sample until two successive estimates agree within ``tol``.

    Returns
    -------
    IntegrationResult
        ``converged`` is False when the budget ran out before ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    dim = len(domain)
    if not 1 <= dim <= 3:
        raise ValueError("domain must have between one and three dimensions")
    if method == "auto":
        method = "adaptive" if dim == 1 else "iterated"
    if method == "qmc":
        return _integrate_qmc(f, domain, tol, max_points, seed)
    if dim == 1:
        a, b = domain[0]
        pts = None
        if points is not None:
            pts = sorted(p for p in points if a < p < b)
        if pts and (math.isinf(a) or math.isinf(b)):
            return _integrate_split_infinite(f, a, b, pts, tol, limit)
        with _quad_warnings() as caught:
            val, err, info = _spi.quad(f, a, b, epsabs=tol, epsrel=0.0, limit=limit,
                                       points=pts or None, full_output=True)[:3]
        return IntegrationResult(float(val), float(err), err <= tol and not _flagged(caught),
                                 int(info["neval"]))
    with _quad_warnings() as caught:
        opts = {"epsabs": tol / 10.0, "epsrel": 0.0, "limit": limit}
        # nquad expects f(x0, x1, ...) with x0 the innermost variable
        val, err = _spi.nquad(f, list(domain), opts=opts)
    return IntegrationResult(float(val), float(err), err <= tol and not _flagged(caught))


def _integrate_split_infinite(f, a, b, pts, tol, limit) -> IntegrationResult:
    edges = [a, *pts, b]
    total, err, ok, neval = 0.0, 0.0, True, 0
    share = tol / (len(edges) - 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = integrate(f, [(lo, hi)], share, limit=limit)
        total += r.value
        err += r.error
        ok = ok and r.converged
        neval += r.evaluations
    return IntegrationResult(total, err, ok, neval)


def _integrate_qmc(f, domain, tol, max_points, seed) -> IntegrationResult:
    dim = len(domain)
    lo = np.array([d[0] for d in domain], dtype=float)
    hi = np.array([d[1] for d in domain], dtype=float)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("quasi-random integration needs a bounded box")
    volume = float(np.prod(hi - lo))
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    n = 2**12
    pts = sampler.random(n)
    total = np.sum(f(*(lo + (hi - lo) * pts).T))
    est = volume * total / n
    while True:
        # oversample by 2x: the next block has as many points as all previous ones
        new = sampler.random(n)
        total += np.sum(f(*(lo + (hi - lo) * new).T))
        n *= 2
        new_est = volume * total / n
        err = abs(new_est - est)
        if err <= tol or n >= max_points:
            return IntegrationResult(float(new_est), float(err), err <= tol, n)
        est = new_est


def _flagged(log) -> bool:
    return any(issubclass(w.category, _spi.IntegrationWarning) for w in log)


@contextmanager
def _quad_warnings():
    """Record scipy IntegrationWarning instead of printing it."""
    with warnings.catch_warnings(record=True) as log:
        warnings.simplefilter("always", _spi.IntegrationWarning)
        yield log


# --------------------------------------------------------------------------- randomness

_MASK_53 = np.uint64(11)
_TWO_M53 = 2.0**-53


@dataclass(frozen=True)
class RandomSource:
    """A reproducible Gaussian stream identified by ``(seed, stream)``.

    Child streams (``spawn``) extend the key path, so disjoint work units can
    be given disjoint, reproducible streams without coordination.
    """

    seed: int
    stream: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        for v in (self.seed, self.stream, *self.path):
            if not 0 <= int(v) < 2**64:
                raise ValueError("seed and stream ids must be unsigned 64-bit integers")

    def spawn(self, index: int) -> "RandomSource":
        return RandomSource(self.seed, self.stream, self.path + (int(index),))

    def bit_generator(self) -> np.random.Philox:
        ss = np.random.SeedSequence(entropy=int(self.seed),
                                    spawn_key=(int(self.stream), *map(int, self.path)))
        return np.random.Philox(ss)

    def iter_normals(self, n: int, block: int = 2**20) -> Iterator[np.ndarray]:
        """Yield the first ``n`` normals of this stream in blocks of at most ``block``."""
        bg = self.bit_generator()
        left = int(n)
        while left > 0:
            k = min(block, left)
            yield _uniform_to_normal(bg.random_raw(k))
            left -= k

    def normals(self, n: int) -> np.ndarray:
        return standard_normals(self, n)


def _uniform_to_normal(raw: np.ndarray) -> np.ndarray:
    # midpoint of each 2^-53 cell keeps u strictly inside (0, 1)
    u = ((raw >> _MASK_53).astype(np.float64) + 0.5) * _TWO_M53
    return ndtri(u)


def standard_normals(src: RandomSource, n: int) -> np.ndarray:
    """The first ``n`` standard normals of ``src`` (inverse-CDF transform)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return np.empty(0)
    return _uniform_to_normal(src.bit_generator().random_raw(int(n)))


# --------------------------------------------------------------------------- chunked sampling

CHUNK_DRAWS = 8192


def sample_chunks(src: RandomSource, n: int, draw: Callable[[RandomSource, int], np.ndarray],
                  workers: int = 1, chunk: int = CHUNK_DRAWS) -> np.ndarray:
    """Concatenate ``draw(src.spawn(k), size_k)`` over fixed chunks of ``n`` draws.

    The chunk layout depends only on ``n`` and ``chunk``, so the output is
    identical for any ``workers`` count.  Threads are used because the heavy
    lifting happens inside numpy, which releases the GIL.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if workers < 1:
        raise ValueError("workers must be at least 1")
    sizes = [min(chunk, n - start) for start in range(0, n, chunk)]
    if not sizes:
        return np.empty(0)

    def one(k: int) -> np.ndarray:
        return np.asarray(draw(src.spawn(k), sizes[k]), dtype=float)

    if workers == 1 or len(sizes) == 1:
        parts = [one(k) for k in range(len(sizes))]
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    return np.concatenate(parts)
