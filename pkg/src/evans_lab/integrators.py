"""One-step methods for linear systems ``y' = A(xi) y`` with 2x2 ``A``.

Steppers take a signed step ``h``; with ``h < 0`` the Gauss-Legendre nodes
``xi_k + (1/2 -+ sqrt3/6) h`` automatically land inside ``[xi_k + h, xi_k]``,
which is how the plus-side shooting integrates towards the origin.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from . import linalg2c as la
from .problem import (
    WaveProblem,
    a_matrix,
    abar_matrix,
    spectral_context,
)

SQRT3 = math.sqrt(3.0)
GL_C1 = 0.5 - SQRT3 / 6.0
GL_C2 = 0.5 + SQRT3 / 6.0
_GL_A12 = 0.25 - SQRT3 / 6.0
_GL_A21 = 0.25 + SQRT3 / 6.0
GL4_COND_LIMIT = 1e12

COORDS = ("raw", "transformed_minus", "transformed_plus", "rescaled_minus", "rescaled_plus")


class StepperKind(str, enum.Enum):
    MAGNUS4 = "magnus4"
    EXPMID = "expmid"
    GL4 = "gl4"


class SingularStageSystem(ArithmeticError):
    """The Gauss-Legendre stage system is numerically singular."""


class IntegrationError(RuntimeError):
    """A stepper failed; carries the index of the failing step."""

    def __init__(self, step: int, xi: float, cause: Exception):
        super().__init__(f"step {step} at xi = {xi:g}: {cause}")
        self.step = step
        self.xi = xi
        self.cause = cause


@dataclass(frozen=True)
class MagnusCoeffs:
    alpha: float
    beta: float


@dataclass
class StepStats:
    steps: int = 0
    pade_fallbacks: int = 0


@dataclass
class IntegrationRun:
    lam: complex
    h: float
    direction: str
    coords: str
    start_xi: float
    end_xi: float
    y0: np.ndarray
    xis: np.ndarray
    states: np.ndarray
    stepper: StepperKind
    backend: str = "eig"
    stats: StepStats = field(default_factory=StepStats)

    @property
    def y_end(self) -> np.ndarray:
        return self.states[-1]

    @property
    def n_steps(self) -> int:
        return len(self.xis) - 1


def magnus_coeffs(p: WaveProblem, side: str, xi_k: float, h: float) -> MagnusCoeffs:
    """Node average and weighted node difference of ``phi_side`` on one step."""
    f1 = float(p.phi_side(side, xi_k + GL_C1 * h))
    f2 = float(p.phi_side(side, xi_k + GL_C2 * h))
    return MagnusCoeffs(alpha=0.5 * (f1 + f2), beta=-SQRT3 / 12.0 * h * (f1 - f2))


def magnus4_omega(A: Callable, xi_k: float, h: float) -> np.ndarray:
    A1 = A(xi_k + GL_C1 * h)
    A2 = A(xi_k + GL_C2 * h)
    return 0.5 * h * (A1 + A2) - SQRT3 / 12.0 * h * h * la.commutator(A1, A2)


def _apply_exp(omega, y_k, backend, stats):
    E, fell_back = la.expm(omega, backend)
    if stats is not None:
        stats.steps += 1
        stats.pade_fallbacks += fell_back
    return E @ y_k


def magnus4_step(A: Callable, xi_k: float, h: float, y_k: np.ndarray, backend: str = "eig",
                 stats: StepStats | None = None) -> np.ndarray:
    """Fourth-order Magnus step ``exp(Omega_k) y_k``.

    The eig backend silently falls back to Padé for nearly defective
    ``Omega_k``; the fallback is counted in ``stats`` when given.
    """
    return _apply_exp(magnus4_omega(A, xi_k, h), y_k, backend, stats)


def expmid_step(A: Callable, xi_k: float, h: float, y_k: np.ndarray, backend: str = "eig",
                stats: StepStats | None = None) -> np.ndarray:
    """Exponential midpoint step ``exp(h A(xi_k + h/2)) y_k``."""
    return _apply_exp(h * A(xi_k + 0.5 * h), y_k, backend, stats)


def gl4_step(A: Callable, xi_k: float, h: float, y_k: np.ndarray,
             stats: StepStats | None = None) -> np.ndarray:
    """Two-stage Gauss-Legendre step.

    The ODE is linear, so the stage equations form a 4x4 linear system,
    solved directly. Fixed-point iteration would diverge once ``h |A|`` is
    large, which is exactly the stiff regime of interest.
    """
    A1 = A(xi_k + GL_C1 * h)
    A2 = A(xi_k + GL_C2 * h)
    M = np.eye(4, dtype=complex)
    M[:2, :2] -= 0.25 * h * A1
    M[:2, 2:] -= _GL_A12 * h * A1
    M[2:, :2] -= _GL_A21 * h * A2
    M[2:, 2:] -= 0.25 * h * A2
    rhs = np.concatenate((A1 @ y_k, A2 @ y_k))
    try:
        Minv = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise SingularStageSystem(str(exc)) from None
    cond = np.linalg.norm(M, 1) * np.linalg.norm(Minv, 1)
    if not cond <= GL4_COND_LIMIT:
        raise SingularStageSystem(f"stage system condition number {cond:.3e}")
    s = Minv @ rhs
    if stats is not None:
        stats.steps += 1
    return y_k + 0.5 * h * (s[:2] + s[2:])


def coefficient_function(p: WaveProblem, lam: complex, coords: str) -> Callable:
    """``xi -> A(xi)`` for the chosen coordinate system."""
    if coords == "raw":
        return lambda xi: a_matrix(p, xi, lam)
    if coords == "transformed_minus":
        ctx = spectral_context(p, lam)
        return lambda xi: abar_matrix(p, ctx, xi, "minus")
    if coords == "transformed_plus":
        ctx = spectral_context(p, lam)
        return lambda xi: abar_matrix(p, ctx, xi, "plus")
    if coords in ("rescaled_minus", "rescaled_plus"):
        # Raw coordinates with only the dominant exponential removed:
        # y = exp(mu xi) z, z' = (A - mu I) z.
        ctx = spectral_context(p, lam)
        mu = ctx.mu_minus_1 if coords == "rescaled_minus" else ctx.mu_plus_2
        return lambda xi: a_matrix(p, xi, lam) - mu * la.IDENTITY
    raise ValueError(f"unknown coordinates {coords!r}; expected one of {COORDS}")


def default_initial_state(p: WaveProblem, lam: complex, coords: str) -> np.ndarray:
    """Boundary state selecting the solution that decays at the start infinity."""
    if coords == "transformed_minus":
        return la.vec2(1, 0)
    if coords == "transformed_plus":
        return la.vec2(0, 1)
    ctx = spectral_context(p, lam)
    if coords == "rescaled_plus":
        return ctx.B_plus[:, 1].copy()
    return ctx.B[:, 0].copy()


def step_count(from_xi: float, to_xi: float, h: float) -> int:
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    n_float = abs(to_xi - from_xi) / h
    n = round(n_float)
    if abs(n - n_float) > 1e-9 * max(1.0, n_float):
        raise ValueError(f"[{from_xi}, {to_xi}] is not a whole number of steps of {h}")
    return n


def _advance(stepper: StepperKind, A: Callable, xi: float, h: float, y: np.ndarray, backend: str,
             stats: StepStats) -> np.ndarray:
    if stepper is StepperKind.MAGNUS4:
        return magnus4_step(A, xi, h, y, backend, stats)
    if stepper is StepperKind.EXPMID:
        return expmid_step(A, xi, h, y, backend, stats)
    return gl4_step(A, xi, h, y, stats)


def integrate_system(A: Callable, stepper: StepperKind | str, from_xi: float, to_xi: float, h: float,
                     y0: np.ndarray, backend: str = "eig", lam: complex = 0j,
                     coords: str = "raw") -> IntegrationRun:
    """Apply ``stepper`` on the uniform grid from ``from_xi`` to ``to_xi``.

    Raises:
        IntegrationError: a step failed or produced a non-finite state.
    """
    stepper = StepperKind(stepper)
    n = step_count(from_xi, to_xi, h)
    sh = h if to_xi >= from_xi else -h
    xis = from_xi + sh * np.arange(n + 1)
    if n:
        xis[-1] = to_xi
    states = np.empty((n + 1, 2), dtype=complex)
    y = np.asarray(y0, dtype=complex)
    states[0] = y
    stats = StepStats()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            try:
                y = _advance(stepper, A, xis[k], sh, y, backend, stats)
            except (SingularStageSystem, ArithmeticError, ValueError) as exc:
                raise IntegrationError(k, float(xis[k]), exc) from exc
            if not np.all(np.isfinite(y)):
                raise IntegrationError(k, float(xis[k]), OverflowError("state is no longer finite"))
            states[k + 1] = y
    return IntegrationRun(
        lam=complex(lam),
        h=h,
        direction="forward" if sh > 0 else "backward",
        coords=coords,
        start_xi=from_xi,
        end_xi=to_xi,
        y0=np.array(y0, dtype=complex),
        xis=xis,
        states=states,
        stepper=stepper,
        backend=backend,
        stats=stats,
    )


def integrate(p: WaveProblem, lam: complex, stepper: StepperKind | str, coords: str, from_xi: float,
              to_xi: float, h: float, y0: np.ndarray | None = None, backend: str = "eig") -> IntegrationRun:
    if y0 is None:
        y0 = default_initial_state(p, lam, coords)
    A = coefficient_function(p, lam, coords)
    return integrate_system(A, stepper, from_xi, to_xi, h, y0, backend, lam, coords)


REFERENCE_H = 0.02
LOCAL_REFERENCE_H = 1e-3


def reference_solution(p: WaveProblem, lam: complex, coords: str, from_xi: float, to_xi: float,
                       y0: np.ndarray | None = None, h_ref: float = REFERENCE_H) -> IntegrationRun:
    """High-accuracy comparison run: Gauss-Legendre with a small step."""
    if not 1e-3 - 1e-15 <= h_ref <= REFERENCE_H + 1e-15:
        raise ValueError(f"h_ref must lie in [1e-3, {REFERENCE_H}], got {h_ref}")
    return integrate(p, lam, StepperKind.GL4, coords, from_xi, to_xi, h_ref, y0)
