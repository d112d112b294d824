"""Lax matrices ``L(lam) = lam^2 C + lam M + G``, ``A(lam) = W + lam R`` and their spectra."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from laxtop.dynamics import BodyParams3D, BodyParamsND, EPState, Params, ep_rhs, omega_from_M
from laxtop.lie import commutator, hat

__all__ = [
    "LaxPair",
    "SpectralData3D",
    "build_C",
    "build_C_3d",
    "build_C_nd",
    "char_poly",
    "det4",
    "energy_form_D",
    "lax_pair",
    "lax_residual",
    "mixed_pfaffian4",
    "pfaffian4",
    "spectral_coeffs_3d",
    "spectral_invariants_nd",
]


@dataclass(frozen=True, eq=False)
class LaxPair:
    C: np.ndarray
    M: np.ndarray
    G: np.ndarray
    R: np.ndarray
    W: np.ndarray

    def L(self, lam):
        return lam * lam * self.C + lam * self.M + self.G

    def A(self, lam):
        return self.W + lam * self.R


def build_C_3d(params: BodyParams3D) -> np.ndarray:
    return params.I[1] * hat(params.r_C)


def build_C_nd(params: BodyParamsND) -> np.ndarray:
    """Constant matrix closing the Lax form for the n-dimensional body.

    Raises ``ValueError`` when the inertia/X pattern admits no such matrix.
    """
    from laxtop.so4 import classify  # so4 depends on this module

    verdict = classify(params.I, params.X)
    if verdict.C is None:
        raise ValueError(f"no Lax matrix C exists for this body: {verdict.reason}")
    return verdict.C


def build_C(params: Params) -> np.ndarray:
    if isinstance(params, BodyParams3D):
        return build_C_3d(params)
    return build_C_nd(params)


def lax_pair(params: Params, state: EPState, C: Optional[np.ndarray] = None) -> LaxPair:
    C = build_C(params) if C is None else np.asarray(C, dtype=float)
    return LaxPair(C, state.M, state.G, params.R, omega_from_M(state.M, params))


def lax_residual(
    params: Params, state: EPState, lam: float, C: Optional[np.ndarray] = None
) -> np.ndarray:
    """``dL/dt - [L(lam), A(lam)]`` along the Euler-Poisson flow.

    ``C`` may be passed explicitly, which lets an nD body outside the
    integrable patterns be probed with a trial matrix.
    """
    lp = lax_pair(params, state, C)
    dM, dG = ep_rhs(state, params)
    return lam * dM + dG - commutator(lp.L(lam), lp.A(lam))


def char_poly(L) -> np.ndarray:
    """Coefficients of ``det(L - mu E)`` in ``mu``, highest power first.

    For skew 3x3 ``L = hat(l)`` this is ``-mu^3 - |l|^2 mu``; complex
    entries are allowed.
    """
    L = np.asarray(L)
    if L.shape != (3, 3):
        raise ValueError("char_poly is defined here for 3x3 matrices")
    tr = L[0, 0] + L[1, 1] + L[2, 2]
    minors = (
        L[0, 0] * L[1, 1] - L[0, 1] * L[1, 0]
        + L[0, 0] * L[2, 2] - L[0, 2] * L[2, 0]
        + L[1, 1] * L[2, 2] - L[1, 2] * L[2, 1]
    )
    det = (
        L[0, 0] * (L[1, 1] * L[2, 2] - L[1, 2] * L[2, 1])
        - L[0, 1] * (L[1, 0] * L[2, 2] - L[1, 2] * L[2, 0])
        + L[0, 2] * (L[1, 0] * L[2, 1] - L[1, 1] * L[2, 0])
    )
    return np.array([-1.0, tr, -minors, det])


@dataclass(frozen=True)
class SpectralData3D:
    """Spectral curve ``p = -mu (mu^2 + A l^4 + B l^3 + D l^2 + E l + F)``."""

    A: float
    B: float
    D: float
    E: float
    F: float

    def as_array(self) -> np.ndarray:
        return np.array([self.A, self.B, self.D, self.E, self.F])

    def P4(self, lam):
        """Torus polynomial: ``mu^2 = P4(lam)`` on the elliptic component."""
        return -((((self.A * lam + self.B) * lam + self.D) * lam + self.E) * lam + self.F)

    def dP4(self, lam):
        return -(((4 * self.A * lam + 3 * self.B) * lam + 2 * self.D) * lam + self.E)


def spectral_coeffs_3d(params: BodyParams3D, state: EPState) -> SpectralData3D:
    I2 = params.I[1]
    x0, _, z0 = params.r_C
    M, g = state.m_vec, state.g_vec
    return SpectralData3D(
        A=I2 * I2 * (x0 * x0 + z0 * z0),
        B=2 * I2 * (M[0] * x0 + M[2] * z0),
        D=2 * I2 * (M @ M / (2 * I2) + x0 * g[0] + z0 * g[2]),
        E=2 * float(M @ g),
        F=float(g @ g),
    )


def energy_form_D(params: BodyParams3D, state: EPState) -> float:
    """``D`` rewritten through the kinetic energy; agrees with ``spectral_coeffs_3d`` on the hypersurface."""
    I = params.I
    x0, _, z0 = params.r_C
    M, g = state.m_vec, state.g_vec
    return 2 * I[1] * (float(np.sum(M * M / (2 * I))) + x0 * g[0] + z0 * g[2])


def pfaffian4(A) -> float:
    A = np.asarray(A)
    if A.shape != (4, 4):
        raise ValueError("pfaffian4 needs a 4x4 matrix")
    return A[0, 1] * A[2, 3] - A[0, 2] * A[1, 3] + A[0, 3] * A[1, 2]


def mixed_pfaffian4(A, B) -> float:
    """Polarization ``Pf(A + B) - Pf(A) - Pf(B)`` (symmetric, bilinear)."""
    A = np.asarray(A)
    B = np.asarray(B)
    return (
        A[0, 1] * B[2, 3] + B[0, 1] * A[2, 3]
        - A[0, 2] * B[1, 3] - B[0, 2] * A[1, 3]
        + A[0, 3] * B[1, 2] + B[0, 3] * A[1, 2]
    )


def det4(A) -> float:
    """Determinant by cofactor expansion along the first row."""
    A = np.asarray(A, dtype=float)

    def det3(m):
        return (
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        )

    total = 0.0
    for j in range(4):
        minor = [[A[i][k] for k in range(4) if k != j] for i in range(1, 4)]
        total += (-1) ** j * A[0][j] * det3(minor)
    return total


def _tr(A, B) -> float:
    return float(np.sum(A * B.T))


def spectral_invariants_nd(
    params: BodyParamsND, state: EPState, C: Optional[np.ndarray] = None
) -> dict[str, float]:
    """Exact lambda-coefficients of ``Tr L(lam)^2`` and ``Pf L(lam)`` for n = 4.

    Keys are ``tr2_k`` and ``pf_k`` for the coefficient of ``lam**k``.
    """
    if params.n != 4:
        raise ValueError("spectral_invariants_nd is defined for n = 4")
    C = build_C_nd(params) if C is None else np.asarray(C, dtype=float)
    M, G = state.M, state.G
    return {
        "tr2_4": _tr(C, C),
        "tr2_3": 2 * _tr(C, M),
        "tr2_2": _tr(M, M) + 2 * _tr(C, G),
        "tr2_1": 2 * _tr(M, G),
        "tr2_0": _tr(G, G),
        "pf_4": pfaffian4(C),
        "pf_3": mixed_pfaffian4(C, M),
        "pf_2": pfaffian4(M) + mixed_pfaffian4(C, G),
        "pf_1": mixed_pfaffian4(M, G),
        "pf_0": pfaffian4(G),
    }
