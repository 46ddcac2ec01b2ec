"""Evans function by shooting from both infinities.

The solution decaying at ``-inf`` starts as ``(1, 0)`` in minus-side
transformed coordinates at ``xi = -L``; the one decaying at ``+inf``
starts as ``(0, 1)`` in plus-side coordinates at ``xi = +L`` and is
integrated backwards. Both are mapped to raw coordinates at ``xi = 0``
without the scalar factors ``exp(mu xi)``, which would overflow for large
``|lambda|`` and do not move the zeros.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .integrators import (
    REFERENCE_H,
    IntegrationRun,
    StepperKind,
    integrate,
)
from .linalg2c import wedge
from .problem import (
    DegenerateKappa,
    OutsideRegionC,
    WaveProblem,
    kappa_degenerate,
    phi_integral,
    region_check,
    spectral_context,
)

MATCH_XI = 0.0


@dataclass(frozen=True)
class EvansResult:
    lam: complex
    D: complex
    y_minus_at_0: np.ndarray
    y_plus_at_0: np.ndarray
    ybar_minus_at_0: np.ndarray
    ybar_plus_at_0: np.ndarray
    h: float
    stepper: StepperKind
    backend: str = "eig"
    pade_fallbacks: int = 0

    def decomposition(self, kappa: complex, kappa_plus: complex) -> tuple[complex, complex]:
        """The two bracketed terms whose sum is ``D``.

        ``(kappa - kappa_+)/2 (v v+ - u u+)`` and ``(kappa + kappa_+)/2 (v u+ - u v+)``
        in transformed components.
        """
        u, v = self.ybar_minus_at_0
        up, vp = self.ybar_plus_at_0
        t1 = 0.5 * (kappa - kappa_plus) * (v * vp - u * up)
        t2 = 0.5 * (kappa + kappa_plus) * (v * up - u * vp)
        return complex(t1), complex(t2)


@dataclass(frozen=True)
class AsymptoticEvans:
    lam: complex
    D_as: complex
    Phi: float


def _check_shootable(p: WaveProblem, lam: complex, side: str):
    ctx = spectral_context(p, lam)
    if kappa_degenerate(p, ctx, side):
        raise DegenerateKappa(f"kappa_{side} = 0 at lambda = {lam}")
    rc = region_check(p, lam)
    if not rc.in_region_C:
        raise OutsideRegionC(f"lambda = {lam} lies outside region C (margin {rc.margin:.3g})")
    return ctx


SHOOT_COORDS = ("transformed", "raw")


def _side_coords(coords: str, side: str) -> str:
    if coords == "transformed":
        return f"transformed_{side}"
    if coords == "raw":
        return f"rescaled_{side}"
    raise ValueError(f"coords must be one of {SHOOT_COORDS}, got {coords!r}")


def _to_raw(ctx, side: str, coords: str, y: np.ndarray) -> np.ndarray:
    return ctx.transform(side) @ y if coords == "transformed" else y.copy()


def _to_transformed(ctx, side: str, coords: str, y: np.ndarray) -> np.ndarray:
    return y.copy() if coords == "transformed" else np.linalg.solve(ctx.transform(side), y)


def shoot_minus_run(p: WaveProblem, lam: complex, stepper, h: float, backend: str = "eig",
                    y0: np.ndarray | None = None, coords: str = "transformed") -> IntegrationRun:
    """Integrate the solution decaying at ``-inf`` from ``-L`` to the origin.

    ``coords="raw"`` works with ``y exp(-mu_-^[1] xi)`` instead of the
    eigenbasis components. Both methods are equivariant under the change
    of basis, so the two choices differ only in round-off.
    """
    _check_shootable(p, lam, "minus")
    return integrate(p, lam, stepper, _side_coords(coords, "minus"), -p.L, MATCH_XI, h, y0, backend)


def shoot_plus_run(p: WaveProblem, lam: complex, stepper, h: float, backend: str = "eig",
                   y0: np.ndarray | None = None, coords: str = "transformed") -> IntegrationRun:
    _check_shootable(p, lam, "plus")
    return integrate(p, lam, stepper, _side_coords(coords, "plus"), p.L, MATCH_XI, h, y0, backend)


def shoot_minus(p: WaveProblem, lam: complex, stepper, h: float, backend: str = "eig",
                y0: np.ndarray | None = None, coords: str = "transformed") -> np.ndarray:
    """Raw-coordinate ``B ybar(0)`` of the solution decaying at ``-inf``."""
    run = shoot_minus_run(p, lam, stepper, h, backend, y0, coords)
    return _to_raw(spectral_context(p, lam), "minus", coords, run.y_end)


def shoot_plus(p: WaveProblem, lam: complex, stepper, h: float, backend: str = "eig",
               y0: np.ndarray | None = None, coords: str = "transformed") -> np.ndarray:
    """Raw-coordinate ``B_+ ybar_+(0)`` of the solution decaying at ``+inf``."""
    run = shoot_plus_run(p, lam, stepper, h, backend, y0, coords)
    return _to_raw(spectral_context(p, lam), "plus", coords, run.y_end)


def evans_fn(p: WaveProblem, lam: complex, stepper, h: float, backend: str = "eig",
             coords: str = "transformed") -> EvansResult:
    ctx = spectral_context(p, lam)
    minus = shoot_minus_run(p, lam, stepper, h, backend, coords=coords)
    plus = shoot_plus_run(p, lam, stepper, h, backend, coords=coords)
    y_minus = _to_raw(ctx, "minus", coords, minus.y_end)
    y_plus = _to_raw(ctx, "plus", coords, plus.y_end)
    return EvansResult(
        lam=complex(lam),
        D=wedge(y_minus, y_plus),
        y_minus_at_0=y_minus,
        y_plus_at_0=y_plus,
        ybar_minus_at_0=_to_transformed(ctx, "minus", coords, minus.y_end),
        ybar_plus_at_0=_to_transformed(ctx, "plus", coords, plus.y_end),
        h=h,
        stepper=StepperKind(stepper),
        backend=backend,
        pade_fallbacks=minus.stats.pade_fallbacks + plus.stats.pade_fallbacks,
    )


def evans_reference(p: WaveProblem, lam: complex, h_ref: float = REFERENCE_H,
                    coords: str = "transformed") -> EvansResult:
    """Evans function from the Gauss-Legendre reference runs."""
    return evans_fn(p, lam, StepperKind.GL4, h_ref, coords=coords)


def total_phi_integral(p: WaveProblem) -> float:
    return phi_integral(p, "minus", MATCH_XI) + phi_integral(p, "plus", MATCH_XI)


def evans_asymptotic(p: WaveProblem, lam: complex, Phi: float | None = None) -> AsymptoticEvans:
    """Three-term large-``|lambda|`` expansion of the Evans function.

    ``D ~ -2 lam^(1/2) + Phi - lam^(-1/2) (Phi^2 - 2 f'_- - 2 f'_+ + c^2) / 4``.
    """
    lam = complex(lam)
    if lam == 0:
        raise ValueError("asymptotic expansion needs lambda != 0")
    if Phi is None:
        Phi = total_phi_integral(p)
    r = cmath.sqrt(lam)
    corr = Phi**2 - 2 * p.phi_minus_limit - 2 * p.phi_plus_limit + p.c**2
    return AsymptoticEvans(lam=lam, D_as=-2 * r + Phi - 0.25 * corr / r, Phi=Phi)
