"""Leading-order error estimates for the shooting integrators.

All estimates are asymptotic in ``|kappa| h >> 1``: they describe the
stiff regime and are not bounds. Components are in transformed
coordinates. On the minus side component 1 is the slow (nonstiff) one and
component 2 the fast (stiff) one; on the plus side the roles are swapped,
so plus-side estimates are returned in plus-side component order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .integrators import StepperKind, magnus_coeffs
from .linalg2c import eig2
from .problem import (
    SQRT6,
    DegenerateKappa,
    WaveProblem,
    gauss_legendre_integral,
    phi_integral,
)

# E_D ~ FISHER_EVANS_COEFF * h^4 for Magnus4 on the Fisher front.
FISHER_EVANS_COEFF = -SQRT6 / 1080.0
GL4_MODEL_COEFF = 1e-3
ROUNDOFF_COEFF = 1e-12


class NonpositiveError(ValueError):
    """An order estimate needs two strictly positive error magnitudes."""


@dataclass(frozen=True)
class LocalErrorEstimate:
    component1: complex
    component2: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.component1, self.component2], dtype=complex)


@dataclass(frozen=True)
class GlobalErrorEstimate:
    component1: complex
    component2: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.component1, self.component2], dtype=complex)


@dataclass(frozen=True)
class ErrorReport:
    lam: complex
    h: float
    method: StepperKind
    measured: complex | float
    estimated: complex | float
    ratio: float

    @classmethod
    def compare(cls, lam, h, method, measured, estimated) -> ErrorReport:
        est = abs(estimated)
        ratio = abs(measured) / est if est != 0 else math.nan
        return cls(complex(lam), h, StepperKind(method), measured, estimated, ratio)


@dataclass(frozen=True)
class StiffnessReport:
    ratio: float


def _kappa_ok(kappa: complex) -> complex:
    kappa = complex(kappa)
    if kappa == 0:
        raise DegenerateKappa("kappa = 0")
    return kappa


def _ordered(side: str, nonstiff, stiff):
    return (nonstiff, stiff) if side == "minus" else (stiff, nonstiff)


def _step_integral(p: WaveProblem, side: str, a: float, b: float) -> float:
    # The GL errors below are O(h^5) differences, so integrate each step
    # with several panels.
    return gauss_legendre_integral(lambda x: p.phi_side(side, x), a, b, panel=abs(b - a) / 4)


def magnus4_local_estimate(p: WaveProblem, side: str, xi_k: float, h: float,
                           kappa: complex) -> LocalErrorEstimate:
    """One-step Magnus4 error from ``xi_k`` to ``xi_k + h``.

    Nonstiff part ``gamma_k / kappa`` with
    ``gamma_k ~ h^5 (phi''''/4320 + phi'^2/144)``; stiff part
    ``beta_k / kappa`` with ``beta_k ~ h^2 phi'/12``, both at the step midpoint.
    """
    kappa = _kappa_ok(kappa)
    m = xi_k + 0.5 * h
    d1 = float(p.derivative(m, 1))
    d4 = float(p.derivative(m, 4))
    gamma = h**5 * (d4 / 4320.0 + d1 * d1 / 144.0)
    beta = h**2 * d1 / 12.0
    return LocalErrorEstimate(*_ordered(side, gamma / kappa, beta / kappa))


def magnus4_global_estimate(p: WaveProblem, side: str, xi_0: float, xi_k: float, h: float,
                            kappa: complex) -> GlobalErrorEstimate:
    """Magnus4 global error at ``xi_k`` after integrating from ``xi_0``.

    The nonstiff error accumulates the local ``gamma_j``; the stiff error is
    damped at every step, leaving only the last local contribution.
    """
    kappa = _kappa_ok(kappa)
    if not xi_0 < xi_k:
        raise ValueError(f"need xi_0 < xi_k, got {xi_0}, {xi_k}")
    d3 = float(p.derivative(xi_k, 3)) - float(p.derivative(xi_0, 3))
    sq = gauss_legendre_integral(lambda x: p.derivative(x, 1) ** 2, xi_0, xi_k)
    nonstiff = h**4 * (d3 / 4320.0 + sq / 144.0) / kappa
    stiff = h**2 * float(p.derivative(xi_k - 0.5 * h, 1)) / (12.0 * kappa)
    return GlobalErrorEstimate(*_ordered(side, nonstiff, stiff))


def magnus4_evans_error_estimate(p: WaveProblem, h: float) -> float:
    """``E_D ~ -(h^4/144) * integral of phi'^2``, independent of lambda."""
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    sq = gauss_legendre_integral(lambda x: p.derivative(x, 1) ** 2, -p.L, p.L)
    return -h**4 * sq / 144.0


def expmid_local_estimate(p: WaveProblem, side: str, xi_k: float, h: float,
                          kappa: complex) -> LocalErrorEstimate:
    """Exponential midpoint: ``beta_k = 0`` removes the ``h^2/kappa`` stiff term.

    The nonstiff part is the midpoint-rule error over kappa; the stiff part
    is ``O(h / kappa^2)`` with no closed-form constant and is reported as 0.
    """
    kappa = _kappa_ok(kappa)
    quad = _step_integral(p, side, xi_k, xi_k + h)
    gamma = quad - h * float(p.phi_side(side, xi_k + 0.5 * h))
    return LocalErrorEstimate(*_ordered(side, gamma / kappa, 0j))


def expmid_error_structure(p: WaveProblem, lam: complex, h: float) -> float:
    """Predicted Evans-error scale ``|lambda|^(-1/2) h^2`` (unit constant)."""
    return abs(complex(lam)) ** -0.5 * h * h


def gl4_local_terms(p: WaveProblem, side: str, xi_k: float, h: float) -> tuple[float, float, float]:
    """The ``(L^a, L^b, L^c)`` coefficients of the Gauss-Legendre local error."""
    c = magnus_coeffs(p, side, xi_k, h)
    quad = _step_integral(p, side, xi_k, xi_k + h)
    La = quad - h * c.alpha
    if side == "minus":
        Phi = phi_integral(p, side, xi_k)
    else:
        Phi = phi_integral(p, side, xi_k + h)
    Lb = -La * (Phi + h * c.alpha + 0.5 * La)
    Lc = 12.0 * c.beta / h - float(p.phi_side(side, xi_k + h)) + float(p.phi_side(side, xi_k))
    return La, Lb, Lc


def gl4_local_estimate(p: WaveProblem, side: str, xi_k: float, h: float,
                       kappa: complex) -> LocalErrorEstimate:
    """GL4 one-step error: ``L^a/kappa + L^b/kappa^2`` nonstiff, ``L^c/kappa^2`` stiff."""
    kappa = _kappa_ok(kappa)
    La, Lb, Lc = gl4_local_terms(p, side, xi_k, h)
    return LocalErrorEstimate(*_ordered(side, La / kappa + Lb / kappa**2, Lc / kappa**2))


def gl4_global_estimate(p: WaveProblem, side: str, xi_0: float, xi_k: float, h: float,
                        kappa: complex) -> GlobalErrorEstimate:
    """Sum the GL4 local terms along the grid from ``xi_0`` to ``xi_k``.

    Unlike Magnus4, GL4 does not damp the stiff component (its stability
    function tends to 1), so both components accumulate.
    """
    kappa = _kappa_ok(kappa)
    n = round((xi_k - xi_0) / h)
    sum_a = sum_b = sum_c = 0.0
    for j in range(n):
        La, Lb, Lc = gl4_local_terms(p, side, xi_0 + j * h, h)
        alpha = magnus_coeffs(p, side, xi_0 + j * h, h).alpha
        sum_b += Lb - h * alpha * sum_a
        sum_a += La
        sum_c += Lc
    nonstiff = sum_a / kappa + sum_b / kappa**2
    return GlobalErrorEstimate(*_ordered(side, nonstiff, sum_c / kappa**2))


def gl4_evans_error_model(lam: complex, h: float, c_model: float = GL4_MODEL_COEFF) -> float:
    """Empirical GL4 Evans-error line ``c_model h^4 / |lambda|``."""
    return c_model * h**4 / abs(complex(lam))


def roundoff_model(lam: complex, coeff: float = ROUNDOFF_COEFF) -> float:
    """Round-off floor ``1e-12 sqrt|lambda|`` of the Evans function."""
    return coeff * math.sqrt(abs(complex(lam)))


def stiffness_ratio(omega_bar: np.ndarray) -> StiffnessReport:
    """Ratio of the larger to the smaller eigenvalue modulus of a step matrix."""
    d = eig2(omega_bar)
    a, b = sorted((abs(d.lambda1), abs(d.lambda2)))
    return StiffnessReport(ratio=b / a if a > 0 else math.inf)


def measured_order(e_h: float, e_h2: float) -> float:
    """Observed order ``log2(e(h) / e(h/2))``."""
    if not (e_h > 0 and e_h2 > 0):
        raise NonpositiveError(f"errors must be positive, got {e_h}, {e_h2}")
    return math.log2(e_h / e_h2)


# Closed forms for the Fisher front, in terms of E = exp(xi / sqrt6).

def fisher_local_estimate(xi: float, h: float, kappa: complex) -> LocalErrorEstimate:
    E = math.exp(xi / SQRT6)
    c1 = h**5 * E * (-8 * E**3 + 33 * E**2 + 702 * E + 1) / (38880 * (1 + E) ** 6)
    c2 = SQRT6 * h**2 * E / (18 * (1 + E) ** 3)
    return LocalErrorEstimate(c1 / kappa, c2 / kappa)


def fisher_global_estimate(xi: float, h: float, kappa: complex) -> GlobalErrorEstimate:
    """Fisher global error from ``xi_0 = -inf``.

    Note the ``(1 + E)^5`` in the nonstiff denominator; this is what the
    general estimate integrates to (the ``phi'''`` and ``phi'^2`` terms
    combine over a common factor ``(1 + E)^5``).
    """
    E = math.exp(xi / SQRT6)
    c1 = SQRT6 * h**4 * E * (36 * E**4 + 180 * E**3 + 364 * E**2 + 353 * E + 1) / (38880 * (1 + E) ** 5)
    c2 = SQRT6 * h**2 * E / (18 * (1 + E) ** 3)
    return GlobalErrorEstimate(c1 / kappa, c2 / kappa)

