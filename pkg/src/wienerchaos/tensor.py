"""Discretized kernels on a uniform grid: contractions, symmetrization and chaos variance.

A kernel of order ``q`` lives on ``[0, L]^q`` sampled at ``m`` cells per axis.
Values are stored unweighted; the cell volume ``h = L / m`` is carried as
metadata and applied only when integrating, so an ``r``-fold contraction is
always weighted by ``h**r``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

MAX_ENTRIES = 10**7
MAX_SYMMETRIZE_ORDER = 6


@dataclass(frozen=True)
class GridTensor:
    values: np.ndarray
    length: float = 1.0
    symmetric: bool = field(default=True)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim < 1:
            raise ValueError("a kernel needs at least one axis")
        if len(set(v.shape)) != 1:
            raise ValueError(f"all axes must share the grid size, got shape {v.shape}")
        if v.size > MAX_ENTRIES:
            raise ValueError(f"kernel has {v.size} entries, budget is {MAX_ENTRIES}")
        if self.length <= 0:
            raise ValueError("interval length must be positive")
        object.__setattr__(self, "values", v)
        if self.symmetric and not is_symmetric(v):
            raise ValueError("values are not invariant under index permutations")

    @property
    def order(self) -> int:
        return self.values.ndim

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return self.length / self.m

    def scaled(self, c: float) -> "GridTensor":
        return GridTensor(c * self.values, self.length, self.symmetric)


def is_symmetric(values: np.ndarray, atol: float = 1e-12) -> bool:
    v = np.asarray(values)
    scale = max(np.max(np.abs(v)), 1.0) if v.size else 1.0
    for i in range(v.ndim - 1):
        if not np.allclose(v, np.swapaxes(v, i, i + 1), rtol=0.0, atol=atol * scale):
            return False
    return True


def _check_grid(f: GridTensor, g: GridTensor):
    if f.m != g.m or not math.isclose(f.length, g.length, rel_tol=1e-12):
        raise ValueError(f"grid mismatch: ({f.m}, {f.length}) vs ({g.m}, {g.length})")


def inner(f: GridTensor, g: GridTensor) -> float:
    _check_grid(f, g)
    if f.order != g.order:
        raise ValueError("inner product needs kernels of equal order")
    return float(np.vdot(f.values, g.values)) * f.h**f.order


def norm(f: GridTensor) -> float:
    return math.sqrt(max(inner(f, f), 0.0))


def contract(f: GridTensor, g: GridTensor, r: int) -> GridTensor:
    """The ``r``-th contraction: identify the last ``r`` arguments of ``f`` and ``g``.

    ``r = 0`` is the tensor product.  When ``r`` equals both orders the
    result is the inner product, returned as a plain float.
    """
    _check_grid(f, g)
    p, q = f.order, g.order
    if not 0 <= r <= min(p, q):
        raise ValueError(f"contraction index {r} outside [0, {min(p, q)}]")
    if r == p == q:
        return inner(f, g)
    out_order = p + q - 2 * r
    if f.m**out_order > MAX_ENTRIES:
        raise ValueError(f"contraction of order {out_order} on m={f.m} exceeds the budget")
    axes = (list(range(p - r, p)), list(range(q - r, q)))
    vals = np.tensordot(f.values, g.values, axes=axes) * f.h**r
    return GridTensor(vals, f.length, symmetric=False)


def symmetrize(t: GridTensor) -> GridTensor:
    """Average over all index permutations."""
    k = t.order
    if k > MAX_SYMMETRIZE_ORDER:
        raise ValueError(f"symmetrization limited to order {MAX_SYMMETRIZE_ORDER}")
    if k == 1 or is_symmetric(t.values, atol=0.0):
        return GridTensor(t.values.copy(), t.length, symmetric=True)
    acc = np.zeros_like(t.values)
    perms = list(itertools.permutations(range(k)))
    for perm in perms:
        acc += np.transpose(t.values, perm)
    acc /= len(perms)
    # summation order differs between permuted entries; read every entry at its
    # sorted index so the result is symmetric bit for bit
    idx = np.sort(np.indices(acc.shape, dtype=np.int16 if t.m < 2**15 else np.int64), axis=0)
    return GridTensor(acc[tuple(idx)], t.length, symmetric=True)


def symmetric_contraction(f: GridTensor, g: GridTensor, r: int) -> GridTensor:
    c = contract(f, g, r)
    return c if isinstance(c, float) else symmetrize(c)


def multiplication_coefficients(p: int, q: int) -> list[tuple[int, int]]:
    """Coefficients ``r! C(p, r) C(q, r)`` of the product formula for multiple integrals."""
    if not (0 <= p <= 12 and 0 <= q <= 12):
        raise ValueError("orders must lie in [0, 12]")
    return [(r, math.factorial(r) * math.comb(p, r) * math.comb(q, r))
            for r in range(min(p, q) + 1)]


def phi_weight(q: int, r: int) -> int:
    """Integer weight of ``||f ~_r f||^2`` in the squared Stein bound."""
    return q * q * math.factorial(2 * q - 2 * r) * math.factorial(r - 1) ** 2 \
        * math.comb(q - 1, r - 1) ** 4


def rho_weight(q: int) -> int:
    """Integer prefactor (without sign) of the middle-contraction pairing, even ``q``."""
    half = q // 2
    return q * math.factorial(q) * math.factorial(half - 1) * math.comb(q - 1, half - 1) ** 2


@dataclass(frozen=True)
class ChaosVarianceReport:
    q: int
    chaos_norm: float
    contraction_norms: dict[int, float]
    raw_contraction_norms: dict[int, float]
    phi: float
    rho: float | None
    rho_defined: bool
    pairing: float | None = None
    condition_norms: dict[tuple[int, int], float | None] = field(default_factory=dict)

    def phi_squared_from_parts(self) -> float:
        total = (1.0 - self.chaos_norm) ** 2
        for r, c in self.contraction_norms.items():
            total += phi_weight(self.q, r) * c * c
        return total


def chaos_variance_report(f: GridTensor, conditions: bool = False) -> ChaosVarianceReport:
    """Variance, Stein bound and limit correlation for ``I_q(f)``.

    ``chaos_norm`` is ``q! ||f||^2 = E[I_q(f)^2]``.  ``phi`` is the exact
    value of ``sqrt(E[(1 - ||D I_q(f)||^2 / q)^2])`` written through the
    symmetrized contraction norms.  ``rho`` is the correlation predicted for
    the limit of ``(F, (1 - ||DF||^2/q)/phi)``; it is zero for odd ``q`` and
    undefined when ``phi == 0``.

    With ``conditions=True`` the norms ``||(f ~_r f) (x)_l (f ~_r f)||`` are
    also computed (skipped as ``None`` when over the entry budget).
    """
    if not f.symmetric:
        raise ValueError("chaos variance needs a symmetric kernel")
    q = f.order
    if q < 2:
        raise ValueError("order must be at least 2")
    chaos_norm = math.factorial(q) * inner(f, f)
    sym_norms: dict[int, float] = {}
    raw_norms: dict[int, float] = {}
    sym_cache: dict[int, GridTensor] = {}
    for r in range(1, q):
        raw = contract(f, f, r)
        sym = symmetrize(raw)
        sym_cache[r] = sym
        raw_norms[r] = norm(raw)
        sym_norms[r] = norm(sym)
    phi2 = (1.0 - chaos_norm) ** 2 + sum(phi_weight(q, r) * sym_norms[r] ** 2 for r in sym_norms)
    phi = math.sqrt(phi2)
    pairing = None
    if q % 2:
        rho, defined = 0.0, True
    else:
        pairing = inner(f, sym_cache[q // 2])
        if phi == 0.0:
            rho, defined = None, False
        else:
            rho, defined = -rho_weight(q) * pairing / phi, True
    cond: dict[tuple[int, int], float | None] = {}
    if conditions:
        for r, sym in sym_cache.items():
            for l in range(1, 2 * (q - r)):
                if f.m ** (4 * (q - r) - 2 * l) > MAX_ENTRIES:
                    cond[(r, l)] = None
                    continue
                cond[(r, l)] = norm(contract(sym, GridTensor(sym.values, sym.length), l))
    return ChaosVarianceReport(q, chaos_norm, sym_norms, raw_norms, phi, rho, defined,
                               pairing, cond)
