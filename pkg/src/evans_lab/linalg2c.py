"""Exact-size complex 2x2 linear algebra.

Matrices are ``(2, 2)`` complex128 numpy arrays and vectors are ``(2,)``
complex128 arrays. Everything here is a pure function of its arguments.

Two matrix-exponential backends are provided. :func:`expm_eig` goes through
an explicit eigendecomposition and is the accurate choice when the two
eigenvalues are far apart, which is the situation for the stiff step
matrices of the shooting problem. :func:`expm_pade` is a diagonal (6, 6)
Padé approximant with scaling and squaring.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

SEP_TOL = 1e-8

# Diagonal (6, 6) Padé coefficients: c_j = (12 - j)! 6! / (12! j! (6 - j)!)
_PADE6 = (
    1.0,
    1.0 / 2.0,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
)
_PADE_THETA = 0.5

IDENTITY = np.eye(2, dtype=complex)


class NearlyDefective(ArithmeticError):
    """Eigenvalues of a 2x2 matrix are too close for a stable eigenbasis."""


@dataclass(frozen=True)
class EigenDecomp2:
    """Eigendecomposition ``M = V diag(lambda1, lambda2) Vinv``.

    ``lambda1`` has the larger real part (ties: larger imaginary part).
    """

    lambda1: complex
    lambda2: complex
    V: np.ndarray
    Vinv: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.V @ np.diag([self.lambda1, self.lambda2]) @ self.Vinv


def mat2(a11, a12, a21, a22) -> np.ndarray:
    return np.array([[a11, a12], [a21, a22]], dtype=complex)


def vec2(u, v) -> np.ndarray:
    return np.array([u, v], dtype=complex)


def norm_inf(M: np.ndarray) -> float:
    """Maximum absolute row sum (vector: maximum modulus)."""
    M = np.asarray(M)
    if M.ndim == 1:
        return float(np.max(np.abs(M)))
    return float(np.max(np.sum(np.abs(M), axis=1)))


def commutator(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return X @ Y - Y @ X


def wedge(a: np.ndarray, b: np.ndarray) -> complex:
    """Determinant of the matrix with columns ``a`` and ``b``."""
    return complex(a[0] * b[1] - a[1] * b[0])


def _ordered(z1: complex, z2: complex) -> tuple[complex, complex]:
    if (z1.real, z1.imag) >= (z2.real, z2.imag):
        return z1, z2
    return z2, z1


def _eigenvector(a11, a12, a21, a22, lam) -> tuple[complex, complex]:
    # Two candidate null vectors of M - lam I; keep the better scaled one.
    c1 = (a12, lam - a11)
    c2 = (lam - a22, a21)
    n1 = abs(c1[0]) + abs(c1[1])
    n2 = abs(c2[0]) + abs(c2[1])
    u, v = c1 if n1 >= n2 else c2
    scale = max(abs(u), abs(v))
    return u / scale, v / scale


def eig2(M: np.ndarray, sep_tol: float = SEP_TOL) -> EigenDecomp2:
    """Eigendecomposition of a complex 2x2 matrix.

    The eigenvalue of larger modulus comes from the quadratic formula with
    the cancellation-free sign choice; the other one is recovered from the
    determinant, so a tiny eigenvalue next to a huge one keeps its
    relative accuracy.

    Raises:
        NearlyDefective: if ``|lambda1 - lambda2| <= sep_tol * ||M||_inf``
            and ``M`` is not already diagonal.
    """
    a11, a12 = complex(M[0, 0]), complex(M[0, 1])
    a21, a22 = complex(M[1, 0]), complex(M[1, 1])

    if a12 == 0 and a21 == 0:
        l1, l2 = _ordered(a11, a22)
        V = IDENTITY.copy() if l1 == a11 else np.array([[0, 1], [1, 0]], dtype=complex)
        return EigenDecomp2(l1, l2, V, V.copy())

    half_tr = 0.5 * (a11 + a22)
    det = a11 * a22 - a12 * a21
    root = cmath.sqrt(0.25 * (a11 - a22) ** 2 + a12 * a21)
    nrm = norm_inf(M)
    if abs(2.0 * root) <= sep_tol * nrm:
        raise NearlyDefective(
            f"eigenvalue gap {abs(2.0 * root):.3e} below {sep_tol:g} * ||M|| = {sep_tol * nrm:.3e}"
        )
    big = half_tr + root if abs(half_tr + root) >= abs(half_tr - root) else half_tr - root
    small = det / big if big != 0 else half_tr - (big - half_tr)
    l1, l2 = _ordered(big, small)

    v1 = _eigenvector(a11, a12, a21, a22, l1)
    v2 = _eigenvector(a11, a12, a21, a22, l2)
    V = mat2(v1[0], v2[0], v1[1], v2[1])
    dV = v1[0] * v2[1] - v2[0] * v1[1]
    Vinv = mat2(v2[1], -v2[0], -v1[1], v1[0]) / dV
    return EigenDecomp2(l1, l2, V, Vinv)


def expm_eig(M: np.ndarray, sep_tol: float = SEP_TOL) -> np.ndarray:
    """``exp(M)`` through the eigendecomposition. Raises :class:`NearlyDefective`."""
    d = eig2(M, sep_tol)
    e1, e2 = cmath.exp(d.lambda1), cmath.exp(d.lambda2)
    return (d.V * np.array([e1, e2])) @ d.Vinv


def expm_pade(M: np.ndarray) -> np.ndarray:
    """``exp(M)`` by (6, 6) Padé with scaling so that ``||M||/2**s <= 0.5``."""
    M = np.asarray(M, dtype=complex)
    nrm = norm_inf(M)
    s = 0
    if nrm > _PADE_THETA:
        s = max(0, math.ceil(math.log2(nrm / _PADE_THETA)))
    X = M / 2.0**s
    X2 = X @ X
    X4 = X2 @ X2
    X6 = X4 @ X2
    c = _PADE6
    U = X @ (c[1] * IDENTITY + c[3] * X2 + c[5] * X4)
    V = c[0] * IDENTITY + c[2] * X2 + c[4] * X4 + c[6] * X6
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


def expm(M: np.ndarray, backend: str = "eig") -> tuple[np.ndarray, bool]:
    """Exponential with the named backend.

    Returns the exponential and whether the eig backend had to fall back
    to Padé because ``M`` was nearly defective.
    """
    if backend == "pade":
        return expm_pade(M), False
    if backend != "eig":
        raise ValueError(f"unknown expm backend {backend!r}")
    try:
        return expm_eig(M), False
    except NearlyDefective:
        return expm_pade(M), True
