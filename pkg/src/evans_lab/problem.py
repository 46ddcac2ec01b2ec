"""Travelling-wave eigenvalue problems and per-lambda spectral bookkeeping.

The scalar reaction-diffusion eigenvalue problem is written as the first
order system ``y' = A(xi; lam) y`` with

    A = [[0, 1], [lam - phi(xi), -c]],     phi = f'(u_hat).

Near each infinity the solution is expressed in the eigenbasis of the
limiting constant matrix with the dominant exponential removed. Those
"transformed coordinates" separate a slow (nonstiff) component from a
fast (stiff) one and are what the shooting code integrates.
"""

from __future__ import annotations

import cmath
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P

from .linalg2c import mat2

log = logging.getLogger(__name__)

SIDES = ("minus", "plus")
BOUNDARY_TOL = 1e-10
QUAD_PANEL = 0.1
QUAD_NODES = 5
_GL_X, _GL_W = np.polynomial.legendre.leggauss(QUAD_NODES)


class DegenerateKappa(ValueError):
    """kappa vanishes, so the eigenbasis transform is undefined."""


class OutsideRegionC(ValueError):
    """lambda is not to the right of the essential spectrum curves."""


@dataclass(frozen=True)
class WaveProblem:
    """A scalar travelling wave reduced to its linearisation data.

    Attributes:
        phi: ``xi -> f'(u_hat(xi))``. Must accept numpy arrays.
        c: wave speed.
        phi_minus_limit: ``f'(u_hat)`` at ``xi = -inf``.
        phi_plus_limit: ``f'(u_hat)`` at ``xi = +inf``.
        L: truncation half-length; the problem lives on ``[-L, L]``.
        phi_integral_hint: optional ``(side, xi) -> Phi_side(xi)``.
        phi_derivative: optional ``(xi, order) -> phi^(order)(xi)``.
        name: label used in reports.
    """

    phi: Callable
    c: float
    phi_minus_limit: float
    phi_plus_limit: float
    L: float = 30.0
    phi_integral_hint: Callable | None = None
    phi_derivative: Callable | None = None
    name: str = "custom"
    boundary_tol: float = field(default=BOUNDARY_TOL, repr=False)

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        dev_minus = abs(float(self.phi(-self.L)) - self.phi_minus_limit)
        dev_plus = abs(float(self.phi(self.L)) - self.phi_plus_limit)
        if max(dev_minus, dev_plus) > self.boundary_tol:
            log.warning(
                "%s: phi not settled at the truncation boundary "
                "(|phi(-L) - limit| = %.2e, |phi(L) - limit| = %.2e, tol %.0e)",
                self.name, dev_minus, dev_plus, self.boundary_tol,
            )

    def limit(self, side: str) -> float:
        _check_side(side)
        return self.phi_minus_limit if side == "minus" else self.phi_plus_limit

    def phi_side(self, side: str, xi):
        """``phi_-`` or ``phi_+``: phi shifted to vanish at that infinity."""
        return self.phi(xi) - self.limit(side)

    def derivative(self, xi, order: int):
        """``phi^(order)(xi)``, analytic when the problem provides it.

        Otherwise fourth-order central differences. The base step is 1e-3
        for the first derivative and grows with the order to keep round-off
        below the truncation error.
        """
        if order == 0:
            return self.phi(xi)
        if self.phi_derivative is not None:
            return self.phi_derivative(xi, order)
        return central_difference(self.phi, xi, order)


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")


# Fourth-order central difference stencils on offsets -3..3.
_FD_STENCILS = {
    1: np.array([0, 1 / 12, -2 / 3, 0, 2 / 3, -1 / 12, 0]),
    2: np.array([0, -1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12, 0]),
    3: np.array([1 / 8, -1, 13 / 8, 0, -13 / 8, 1, -1 / 8]),
    4: np.array([-1 / 6, 2, -13 / 2, 28 / 3, -13 / 2, 2, -1 / 6]),
}
_FD_STEPS = {1: 1e-3, 2: 5e-3, 3: 2e-2, 4: 4e-2}


def central_difference(f: Callable, xi, order: int):
    if order not in _FD_STENCILS:
        raise ValueError(f"finite differences only for orders 1..4, got {order}")
    d = _FD_STEPS[order]
    xi = np.asarray(xi, dtype=float)
    offsets = np.arange(-3, 4)
    vals = f(xi[..., None] + offsets * d)
    return np.tensordot(vals, _FD_STENCILS[order], axes=([-1], [0])) / d**order


@dataclass(frozen=True)
class SpectralContext:
    """Quantities that depend on lambda but not on xi."""

    lam: complex
    kappa: complex
    kappa_plus: complex
    mu_minus_1: complex
    mu_minus_2: complex
    mu_plus_1: complex
    mu_plus_2: complex
    B: np.ndarray
    B_plus: np.ndarray

    def kappa_side(self, side: str) -> complex:
        _check_side(side)
        return self.kappa if side == "minus" else self.kappa_plus

    def transform(self, side: str) -> np.ndarray:
        _check_side(side)
        return self.B if side == "minus" else self.B_plus


@dataclass(frozen=True)
class RegionCheck:
    in_region_C: bool
    margin: float


def principal_sqrt(z: complex) -> complex:
    """Square root with non-negative real part (branch cut on the negative axis)."""
    r = cmath.sqrt(z)
    if r.real < 0:
        r = -r
    return r


def spectral_context(p: WaveProblem, lam: complex) -> SpectralContext:
    lam = complex(lam)
    c = p.c
    kappa = principal_sqrt(c * c + 4.0 * (lam - p.phi_minus_limit))
    kappa_plus = principal_sqrt(c * c + 4.0 * (lam - p.phi_plus_limit))
    mm1, mm2 = 0.5 * (-c + kappa), 0.5 * (-c - kappa)
    mp1, mp2 = 0.5 * (-c + kappa_plus), 0.5 * (-c - kappa_plus)
    return SpectralContext(
        lam=lam,
        kappa=kappa,
        kappa_plus=kappa_plus,
        mu_minus_1=mm1,
        mu_minus_2=mm2,
        mu_plus_1=mp1,
        mu_plus_2=mp2,
        B=mat2(1, 1, mm1, mm2),
        B_plus=mat2(1, 1, mp1, mp2),
    )


def a_matrix(p: WaveProblem, xi: float, lam: complex) -> np.ndarray:
    return mat2(0, 1, lam - p.phi(xi), -p.c)


def kappa_degenerate(p: WaveProblem, ctx: SpectralContext, side: str) -> bool:
    """True when ``kappa_side**2`` vanishes up to round-off in its terms."""
    k = ctx.kappa_side(side)
    scale = p.c**2 + 4.0 * (abs(ctx.lam) + abs(p.limit(side)))
    return abs(k) ** 2 <= 1e-14 * scale


def abar_matrix(p: WaveProblem, ctx: SpectralContext, xi: float, side: str = "minus") -> np.ndarray:
    """Coefficient matrix in transformed coordinates.

    Minus side: ``B^-1 A B - mu_-^[1] I``, whose second component is stiff
    (decays like ``exp(-kappa xi)``). Plus side: ``B_+^-1 A B_+ - mu_+^[2] I``,
    whose first component is stiff when integrating towards ``-inf``.
    """
    k = ctx.kappa_side(side)
    if kappa_degenerate(p, ctx, side):
        raise DegenerateKappa(f"kappa_{side} = 0 at lambda = {ctx.lam}")
    q = p.phi_side(side, xi) / k
    if side == "minus":
        return mat2(-q, -q, q, -k + q)
    return mat2(k - q, -q, q, q)


def region_check(p: WaveProblem, lam: complex) -> RegionCheck:
    ctx = spectral_context(p, lam)
    margin = min(
        ctx.mu_minus_1.real,
        -ctx.mu_minus_2.real,
        ctx.mu_plus_1.real,
        -ctx.mu_plus_2.real,
    )
    return RegionCheck(in_region_C=margin > 0, margin=margin)


def _panels(a: float, b: float, panel: float = QUAD_PANEL):
    n = max(1, math.ceil((b - a) / panel - 1e-9))
    edges = np.linspace(a, b, n + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_X).ravel()
    w = (half[:, None] * _GL_W).ravel()
    return x, w


def gauss_legendre_integral(f: Callable, a: float, b: float, panel: float = QUAD_PANEL) -> float:
    """Composite 5-point Gauss-Legendre quadrature of ``f`` over ``[a, b]``."""
    if b == a:
        return 0.0
    if b < a:
        return -gauss_legendre_integral(f, b, a, panel)
    x, w = _panels(a, b, panel)
    return float(np.dot(w, f(x)))


def phi_integral(p: WaveProblem, side: str, xi: float) -> float:
    """Tail integral of ``phi_side``.

    ``Phi_-(xi)`` integrates ``phi_-`` over ``[-L, xi]`` and ``Phi_+(xi)``
    integrates ``phi_+`` over ``[xi, L]``; the tails beyond ``+-L`` are
    dropped, matching the truncated shooting problem.
    """
    _check_side(side)
    if p.phi_integral_hint is not None:
        return float(p.phi_integral_hint(side, xi))
    if side == "minus":
        return gauss_legendre_integral(lambda x: p.phi_side("minus", x), -p.L, xi)
    return gauss_legendre_integral(lambda x: p.phi_side("plus", x), xi, p.L)


def eigenvalue_wedge(p: WaveProblem) -> tuple[float, float]:
    """Bounds ``(Re lam <= a, Re lam + |Im lam| <= b)`` on the point spectrum."""
    n = int(round(2 * p.L / 0.01))
    grid = np.linspace(-p.L, p.L, n + 1)
    m = max(
        float(np.max(np.abs(p.phi(grid)))),
        abs(p.phi_minus_limit),
        abs(p.phi_plus_limit),
    )
    return p.c**2 / 4 + m, p.c**2 + m


# ---------------------------------------------------------------------------
# Fisher's equation u_t = u_xx + u - u^2

SQRT6 = math.sqrt(6.0)
FISHER_SPEED = -5.0 / 6.0 * SQRT6


def fisher_u(xi):
    return 1.0 / (1.0 + np.exp(np.asarray(xi, dtype=float) / SQRT6)) ** 2


def _fisher_s(xi):
    # s = 1 / (1 + exp(xi / sqrt6)), evaluated without overflow.
    return 0.5 * (1.0 - np.tanh(np.asarray(xi, dtype=float) / (2.0 * SQRT6)))


@lru_cache(maxsize=None)
def _fisher_poly(order: int) -> np.ndarray:
    # phi = 1 - 2 s^2 and ds/dxi = -s (1 - s) / sqrt6, so every derivative
    # is a polynomial in s.
    if order == 0:
        return np.array([1.0, 0.0, -2.0])
    prev = _fisher_poly(order - 1)
    return P.polymul(P.polyder(prev), np.array([0.0, -1.0, 1.0])) / SQRT6


def fisher_phi(xi):
    s = _fisher_s(xi)
    return 1.0 - 2.0 * s * s


def fisher_phi_derivative(xi, order: int):
    return P.polyval(_fisher_s(xi), _fisher_poly(order))


def fisher_problem(L: float = 30.0) -> WaveProblem:
    """Fisher front: ``phi = 1 - 2/(1 + exp(xi/sqrt6))^2``, ``c = -(5/6) sqrt6``."""
    if L < 20:
        raise ValueError(f"Fisher problem needs L >= 20, got {L}")
    return WaveProblem(
        phi=fisher_phi,
        c=FISHER_SPEED,
        phi_minus_limit=-1.0,
        phi_plus_limit=1.0,
        L=L,
        phi_derivative=fisher_phi_derivative,
        name="fisher",
        # phi approaches -1 only like 4 exp(xi/sqrt6) at -inf.
        boundary_tol=5.0 * math.exp(-L / SQRT6),
    )


PROBLEMS = {"fisher": fisher_problem}


def get_problem(name: str, L: float = 30.0) -> WaveProblem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; available: {sorted(PROBLEMS)}") from None
    return factory(L)
