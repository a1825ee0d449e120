"""Hermite polynomials, Gaussian CDF derivatives and the Stein solution for indicator test functions.

All functions accept scalars or numpy arrays for the real argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcx

from .numerics import integrate

SQRT_2PI = math.sqrt(2.0 * math.pi)
STEIN_SUP = SQRT_2PI / 4.0
MAX_HERMITE_ORDER = 30
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_SQRT_HALF_PI = math.sqrt(math.pi / 2.0)


def _check_order(q: int, lo: int = 0, hi: int = MAX_HERMITE_ORDER) -> int:
    if int(q) != q:
        raise ValueError(f"order must be an integer, got {q!r}")
    q = int(q)
    if q < lo or q > hi:
        raise ValueError(f"order {q} outside supported range [{lo}, {hi}]")
    return q


def hermite(q: int, z):
    """Probabilists' Hermite polynomial ``H_q(z)`` by forward recurrence."""
    q = _check_order(q)
    z = np.asarray(z, dtype=float)
    prev = np.ones_like(z)
    if q == 0:
        return prev if prev.ndim else float(prev)
    cur = z.copy()
    for k in range(1, q):
        prev, cur = cur, z * cur - k * prev
    return cur if cur.ndim else float(cur)


def normal_pdf(z):
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z) / SQRT_2PI
    return out if out.ndim else float(out)


def normal_cdf(z):
    z = np.asarray(z, dtype=float)
    out = 0.5 * erfc(-z / math.sqrt(2.0))
    return out if out.ndim else float(out)


def normal_sf(z):
    z = np.asarray(z, dtype=float)
    out = 0.5 * erfc(z / math.sqrt(2.0))
    return out if out.ndim else float(out)


def mills_ratio(x):
    """``sqrt(2 pi) exp(x^2/2) (1 - Phi(x))``, stable for large positive ``x``.

    Uses the scaled complementary error function, so no overflow or
    cancellation occurs in the upper tail.  For very negative ``x`` the value
    itself overflows, as it should.
    """
    x = np.asarray(x, dtype=float)
    out = math.sqrt(math.pi / 2.0) * erfcx(x / math.sqrt(2.0))
    return out if out.ndim else float(out)


def phi_cdf_derivative(q: int, z):
    """The ``q``-th derivative of the standard normal CDF."""
    q = _check_order(q, 1)
    sign = -1.0 if (q - 1) % 2 else 1.0
    out = sign * np.asarray(hermite(q - 1, z)) * np.asarray(normal_pdf(z))
    return out if np.ndim(out) else float(out)


def stein_solution(z: float, x):
    """Bounded solution ``f_z`` of ``f'(x) - x f(x) = 1{x <= z} - Phi(z)``.

    Evaluated through Mills ratios so that both branches stay finite for any
    finite ``(z, x)``; the exponential factor is always ``exp(-(z^2-x^2)/2)``
    with a nonpositive exponent where it is used.
    """
    z = float(z)
    if np.ndim(x) == 0:
        return _stein_solution_scalar(z, float(x))
    x = np.asarray(x, dtype=float)
    phi_z, q_z = normal_cdf(z), normal_sf(z)
    out = np.empty_like(x)
    below = x <= z
    with np.errstate(over="ignore", invalid="ignore"):
        # x <= z
        xb = x[below]
        neg = xb < 0
        vb = np.empty_like(xb)
        vb[neg] = mills_ratio(-xb[neg]) * q_z
        xp = xb[~neg]
        vb[~neg] = normal_cdf(xp) * mills_ratio(z) * np.exp(0.5 * (xp * xp - z * z))
        out[below] = vb
        # x > z
        xa = x[~below]
        pos = xa > 0
        va = np.empty_like(xa)
        va[pos] = phi_z * mills_ratio(xa[pos])
        xn = xa[~pos]
        va[~pos] = normal_sf(xn) * mills_ratio(-z) * np.exp(0.5 * (xn * xn - z * z))
        out[~below] = va
    return out if out.ndim else float(out)


def _mills_scalar(x: float) -> float:
    return _SQRT_HALF_PI * float(erfcx(x * _INV_SQRT2))


def _stein_solution_scalar(z: float, x: float) -> float:
    if x <= z:
        if x < 0:
            return _mills_scalar(-x) * 0.5 * math.erfc(z * _INV_SQRT2)
        return (0.5 * math.erfc(-x * _INV_SQRT2) * _mills_scalar(z)
                * math.exp(0.5 * (x * x - z * z)))
    if x > 0:
        return 0.5 * math.erfc(-z * _INV_SQRT2) * _mills_scalar(x)
    return 0.5 * math.erfc(x * _INV_SQRT2) * _mills_scalar(-z) * math.exp(0.5 * (x * x - z * z))


def stein_derivative(z: float, x, side: str = "left"):
    """Derivative of :func:`stein_solution` in ``x``.

    At the jump ``x == z`` the one-sided limit selected by ``side`` is
    returned: ``"left"`` is the limit from ``x < z``, ``"right"`` from ``x > z``.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    z = float(z)
    if np.ndim(x) == 0:
        x = float(x)
        ind = 1.0 if (x < z or (x == z and side == "left")) else 0.0
        return x * _stein_solution_scalar(z, x) + ind - 0.5 * math.erfc(-z * _INV_SQRT2)
    x = np.asarray(x, dtype=float)
    ind = np.where(x < z, 1.0, 0.0)
    if side == "left":
        ind = np.where(x == z, 1.0, ind)
    out = x * np.asarray(stein_solution(z, x)) + ind - normal_cdf(z)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PairingCheck:
    q: int
    z: float
    closed_form: float
    quadrature: float
    error_estimate: float
    converged: bool

    @property
    def residual(self) -> float:
        return abs(self.closed_form - self.quadrature)


def stein_hermite_pairing(q: int, z: float) -> float:
    """``E[f_z'(N) H_q(N)]`` in closed form: ``H_{q+1}(z) pdf(z) / (q + 2)``."""
    q = _check_order(q, 1, 10)
    return float(hermite(q + 1, z)) * float(normal_pdf(z)) / (q + 2)


def verify_stein_hermite_pairing(q: int, z: float, tol: float = 1e-12) -> PairingCheck:
    """Compare the closed form against direct quadrature of the Gaussian pairing.

    ``tol`` is absolute for pairings of size at most one and relative above.
    """
    q = _check_order(q, 1, 10)
    z = float(z)
    closed = stein_hermite_pairing(q, z)
    tol = tol * max(1.0, abs(closed))

    def integrand(x):
        # scalar recurrence avoids numpy overhead inside the adaptive loop
        h0, h1 = 1.0, x
        for k in range(1, q):
            h0, h1 = h1, x * h1 - k * h0
        return stein_derivative(z, x) * h1 * math.exp(-0.5 * x * x) / SQRT_2PI

    # |H_q| pdf is far below tol beyond 15 standard deviations of |z|
    reach = abs(z) + 15.0
    left = integrate(integrand, [(-reach, z)], tol / 2)
    right = integrate(integrand, [(z, reach)], tol / 2)
    return PairingCheck(q, z, closed, left.value + right.value,
                        left.error + right.error, left.converged and right.converged)
