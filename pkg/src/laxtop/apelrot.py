"""Apel'rot heavy top: conditions, spectral frame, divisor dynamics and reconstruction.

Conventions. The mass center lies in the xz-plane, ``r_C = R (alpha, 0, beta)``
with ``R = sqrt(x0^2 + z0^2)``. On the invariant hypersurface the momentum is
orthogonal to ``r_C`` and is encoded by a single complex number

    x = (beta M1 - alpha M3 - i M2) / sqrt(2),

and likewise ``y`` for gamma. The elliptic component of the spectral curve
is ``mu^2 = P4(lam)`` and the tracked divisor point is ``nu = (-y/x, -Omega(-y/x))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from laxtop._rk import IntegrationError, dopri5
from laxtop.dynamics import BodyParams3D, EPState, ep_rhs, integrate, sample_times
from laxtop.lax import SpectralData3D, spectral_coeffs_3d
from laxtop.lie import unhat

__all__ = [
    "ApelrotCheck",
    "ApelrotFrame",
    "DegenerateDivisor",
    "DivisorPoint",
    "Moduli",
    "ReconstructionResult",
    "check_apelrot",
    "divisor_path",
    "divisor_point",
    "eigenvector",
    "elliptic_time",
    "eq7_value",
    "eq19_residual",
    "flow_divisor",
    "frame_derivatives",
    "frame_transform",
    "hermite_path",
    "hypersurface_value",
    "integral_values",
    "nu_flow_rhs",
    "phase_flow",
    "phase_oracle",
    "phase_rhs",
    "reconstruct",
    "reconstruct_moduli",
    "reconstruct_state",
    "reference_params",
    "reference_state",
    "riccati_coeffs",
    "sample_apelrot_params",
    "sample_hypersurface_state",
    "tilde_L",
    "track_branch",
    "U_matrix",
    "xy_rhs",
]

SQRT2 = np.sqrt(2.0)


class DegenerateDivisor(ValueError):
    """Raised when ``x`` vanishes and the divisor point is undefined."""


def reference_params() -> BodyParams3D:
    return BodyParams3D(I=[3.0, 2.0, 1.0], r_C=[1.0, 0.0, -np.sqrt(3.0)])


def reference_state(params: Optional[BodyParams3D] = None) -> EPState:
    params = params or reference_params()
    return EPState.from_omega([0.1, 0.2, 0.1 * np.sqrt(3.0)], [0.6, 0.48, 0.64], params)


# ---------------------------------------------------------------------------
# conditions


@dataclass(frozen=True)
class ApelrotCheck:
    ok: bool
    status: str  # "ok", "violated", "inapplicable", "degenerate"
    y0: float
    residual: float
    scale: float

    def __bool__(self) -> bool:
        return self.ok


def check_apelrot(params: BodyParams3D, rtol: float = 1e-12) -> ApelrotCheck:
    """Test ``y0 = 0`` and ``x0 sqrt(I1(I2-I3)) + z0 sqrt(I3(I1-I2)) = 0``.

    Radicands of equal sign are both taken in absolute value so either
    monotone ordering of the moments works; mixed signs make the condition
    inapplicable. Equal moments pass vacuously and are flagged ``degenerate``.
    """
    I1, I2, I3 = params.I
    x0, y0, z0 = params.r_C
    r1, r2 = I1 * (I2 - I3), I3 * (I1 - I2)
    if r1 * r2 < 0:
        return ApelrotCheck(False, "inapplicable", float(y0), float("nan"), 0.0)
    a, b = x0 * np.sqrt(abs(r1)), z0 * np.sqrt(abs(r2))
    res = float(a + b)
    scale = float(abs(a) + abs(b))
    tol = rtol * scale + 1e-300
    y_ok = y0 == 0.0 or abs(y0) <= rtol * np.linalg.norm(params.r_C)
    if r1 == 0 and r2 == 0:
        return ApelrotCheck(bool(y_ok), "degenerate" if y_ok else "violated", float(y0), 0.0, 0.0)
    ok = bool(y_ok and abs(res) <= tol)
    return ApelrotCheck(ok, "ok" if ok else "violated", float(y0), res, scale)


def hypersurface_value(state: EPState, params: BodyParams3D) -> float:
    """``I1 x0 w1 + I3 z0 w3``, or for a gyrostat ``(I1-I2) w1 z0 + (I2-I3) w3 x0 - (P3 x0 - P1 z0)``."""
    I1, I2, I3 = params.I
    x0, _, z0 = params.r_C
    w = (state.m_vec - params.P) / params.I
    if params.is_gyrostat:
        P1, _, P3 = params.P
        return float((I1 - I2) * w[0] * z0 + (I2 - I3) * w[2] * x0 - (P3 * x0 - P1 * z0))
    return float(I1 * x0 * w[0] + I3 * z0 * w[2])


def eq7_value(state: EPState, params: BodyParams3D) -> float:
    """``(I1-I2) w1 z0 + (I2-I3) w3 x0``: vanishing is what closes the Lax form."""
    I1, I2, I3 = params.I
    x0, _, z0 = params.r_C
    w = (state.m_vec - params.P) / params.I
    return float((I1 - I2) * w[0] * z0 + (I2 - I3) * w[2] * x0)


def eq19_residual(params: BodyParams3D) -> float:
    """``(beta/alpha)^2 (1/I1 - 1/I2) - (1/I2 - 1/I3)``; zero under the Apel'rot conditions."""
    I1, I2, I3 = params.I
    x0, _, z0 = params.r_C
    return float((z0 / x0) ** 2 * (1 / I1 - 1 / I2) - (1 / I2 - 1 / I3))


def sample_apelrot_params(rng, P=None) -> BodyParams3D:
    """Random Apel'rot body with ``I1 > I2 > I3`` and unit-scale offsets."""
    while True:
        I = np.sort(rng.uniform(1.0, 3.0, 3))[::-1]
        if I[0] - I[1] > 0.1 and I[1] - I[2] > 0.1:
            break
    x0 = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5)
    z0 = -x0 * np.sqrt(I[0] * (I[1] - I[2])) / np.sqrt(I[2] * (I[0] - I[1]))
    return BodyParams3D(I=I, r_C=[x0, 0.0, z0], P=np.zeros(3) if P is None else P)


def sample_hypersurface_state(params: BodyParams3D, rng, scale: float = 1.0) -> EPState:
    """Random state on the (Sretenskiy) hypersurface with unit gamma."""
    I1, I2, I3 = params.I
    x0, _, z0 = params.r_C
    w1, w2 = scale * rng.uniform(-1, 1, 2)
    if params.is_gyrostat:
        P1, _, P3 = params.P
        w3 = (P3 * x0 - P1 * z0 - (I1 - I2) * w1 * z0) / ((I2 - I3) * x0)
    else:
        w3 = -I1 * x0 * w1 / (I3 * z0)
    g = rng.normal(size=3)
    return EPState.from_omega([w1, w2, w3], g / np.linalg.norm(g), params)


# ---------------------------------------------------------------------------
# spectral frame


@dataclass(frozen=True)
class ApelrotFrame:
    """Frame data: ``Omega(lam) = -i (c2 lam^2 + c1 lam + c0)``, ``Delta = y + lam x``.

    ``c1 = alpha M1 + beta M3`` vanishes on the hypersurface.
    """

    alpha: float
    beta: float
    R: float
    x: complex
    y: complex
    c2: float
    c1: float
    c0: float

    def Omega(self, lam):
        return -1j * ((self.c2 * lam + self.c1) * lam + self.c0)

    def Delta(self, lam):
        return self.y + lam * self.x

    def Delta_star(self, lam):
        return np.conj(self.y) + lam * np.conj(self.x)

    def P4(self, lam):
        return self.Omega(lam) ** 2 - 2 * self.Delta(lam) * self.Delta_star(lam)


def _frame_complex(v, alpha, beta) -> complex:
    return complex(beta * v[0] - alpha * v[2], -v[1]) / SQRT2


def frame_transform(state: EPState, params: BodyParams3D) -> ApelrotFrame:
    x0, _, z0 = params.r_C
    R = float(np.hypot(x0, z0))
    if R == 0.0:
        raise ValueError("frame needs a nonzero mass-center offset")
    alpha, beta = x0 / R, z0 / R
    M, g = state.m_vec, state.g_vec
    I2 = params.I[1]
    return ApelrotFrame(
        alpha=alpha,
        beta=beta,
        R=R,
        x=_frame_complex(M, alpha, beta),
        y=_frame_complex(g, alpha, beta),
        c2=I2 * (alpha * x0 + beta * z0),
        c1=alpha * M[0] + beta * M[2],
        c0=alpha * g[0] + beta * g[2],
    )


def U_matrix(alpha: float, beta: float) -> np.ndarray:
    s = 1 / SQRT2
    return np.array(
        [
            [alpha, 1j * beta * s, beta * s],
            [0.0, s, 1j * s],
            [beta, -1j * alpha * s, -alpha * s],
        ]
    )


def tilde_L(frame: ApelrotFrame, lam) -> np.ndarray:
    """``L(lam)`` in the basis that diagonalizes ``C`` (hypersurface form)."""
    D, Ds, Om = frame.Delta(lam), frame.Delta_star(lam), frame.Omega(lam)
    return np.array([[0.0, D, 1j * Ds], [-Ds, -Om, 0.0], [1j * D, 0.0, Om]])


def eigenvector(frame: ApelrotFrame, lam, mu, restricted: bool = False) -> np.ndarray:
    """Eigenvector ``(1, f2, f3)`` of ``tilde_L(lam)`` for eigenvalue ``mu``.

    ``restricted=True`` uses the forms valid on the elliptic component.
    """
    D, Ds, Om = frame.Delta(lam), frame.Delta_star(lam), frame.Omega(lam)
    if restricted:
        return np.array([1.0, -(Om - mu) / (2 * D), (Om + mu) / (2j * Ds)])
    return np.array([1.0, -Ds / (Om + mu), -1j * D / (Om - mu)])


def xy_rhs(state: EPState, params: BodyParams3D, extra_sqrt2: bool = False) -> tuple[complex, complex]:
    """Time derivatives of ``x`` and ``y`` as a linear system on the hypersurface.

    The diagonal coefficient is ``i M1 (1/I1 - 1/I2) / alpha``; with
    ``extra_sqrt2=True`` it carries an extra ``1/sqrt(2)``, which direct
    differentiation does not support.
    """
    fr = frame_transform(state, params)
    I1, I2, _ = params.I
    M1 = state.m_vec[0]
    diag = 1j * M1 * (1 / I1 - 1 / I2) / fr.alpha
    if extra_sqrt2:
        diag /= SQRT2
    dx = diag * fr.x + 1j * fr.R * fr.y
    dy = -1j * fr.c0 / I2 * fr.x + diag * fr.y
    return dx, dy


def frame_derivatives(state: EPState, params: BodyParams3D) -> tuple[complex, complex]:
    """``dx/dt`` and ``dy/dt`` by pushing the equations of motion through the frame."""
    dM, dG = ep_rhs(state, params)
    fr = frame_transform(state, params)
    return _frame_complex(unhat(dM), fr.alpha, fr.beta), _frame_complex(unhat(dG), fr.alpha, fr.beta)


# ---------------------------------------------------------------------------
# divisor


@dataclass(frozen=True)
class DivisorPoint:
    """Point ``(lam, mu)`` on ``mu^2 = P4(lam)``; ``branch`` is +1 when ``mu`` is the principal root."""

    lam: complex
    mu: complex
    branch: int


def _branch_of(mu: complex, P4val: complex) -> int:
    r = np.sqrt(complex(P4val))
    return 1 if abs(mu - r) <= abs(mu + r) else -1


def divisor_point(frame: ApelrotFrame, curve_atol: float = 1e-10) -> DivisorPoint:
    M2 = 2 * abs(frame.x) ** 2
    if abs(frame.x) ** 2 < 1e-12 * M2 + 1e-300:
        raise DegenerateDivisor("x vanishes: M = 0 leaves the divisor undefined")
    lam = -frame.y / frame.x
    mu = -frame.Omega(lam)
    p4 = frame.P4(lam)
    scale = 1.0 + abs(mu) ** 2
    if abs(mu * mu - p4) > curve_atol * scale:
        raise ValueError(f"divisor point is off the curve by {abs(mu * mu - p4):.3e}")
    return DivisorPoint(complex(lam), complex(mu), _branch_of(mu, p4))


def track_branch(spec: SpectralData3D, lam: complex, mu_ref: complex) -> complex:
    """The root of ``mu^2 = P4(lam)`` closest to ``mu_ref``."""
    r = np.sqrt(complex(spec.P4(lam)))
    return r if abs(r - mu_ref) <= abs(r + mu_ref) else -r


def nu_flow_rhs(nu: DivisorPoint, I2: float, spec: SpectralData3D) -> complex:
    """``d lam/dt = mu / I2`` with ``mu`` recomputed on the curve and continued from ``nu.mu``."""
    return track_branch(spec, nu.lam, nu.mu) / I2


def flow_divisor(
    nu0: DivisorPoint, spec: SpectralData3D, I2: float, t_eval, tol: float = 1e-12
) -> tuple[np.ndarray, np.ndarray]:
    """Carry ``nu`` along the curve for the sample times ``t_eval``.

    Integrates ``lam' = mu/I2, mu' = P4'(lam)/(2 I2)``, which stays on the
    curve and passes branch points without any sheet bookkeeping.
    """

    def f(t, z):
        lam = complex(z[0], z[1])
        dlam = complex(z[2], z[3]) / I2
        dmu = spec.dP4(lam) / (2 * I2)
        return np.array([dlam.real, dlam.imag, dmu.real, dmu.imag])

    z0 = [nu0.lam.real, nu0.lam.imag, nu0.mu.real, nu0.mu.imag]
    sol = dopri5(f, 0.0, z0, np.asarray(t_eval, float), tol, tol)
    return sol.y[:, 0] + 1j * sol.y[:, 1], sol.y[:, 2] + 1j * sol.y[:, 3]


_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _gl_panels(path, s0, s1, npan, spec, mu_start):
    edges = np.linspace(s0, s1, npan + 1)
    total = 0.0 + 0.0j
    mu = mu_start
    min_ratio = np.inf
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        s = 0.5 * (a + b) + half * _GL_X
        lam, dlam = path(s)
        for k in range(s.shape[0]):
            mu = track_branch(spec, lam[k], mu)
            min_ratio = min(min_ratio, abs(mu) / (1.0 + abs(lam[k]) ** 2))
            total += half * _GL_W[k] * dlam[k] / mu
    lam_end, _ = path(np.array([s1]))
    mu = track_branch(spec, lam_end[0], mu)
    return total, mu, min_ratio


def elliptic_time(
    path: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    spec: SpectralData3D,
    I2: float,
    mu_start: complex,
    s_span: tuple[float, float] = (0.0, 1.0),
    tol: float = 1e-10,
    panels: int = 16,
    max_panels: int = 1 << 14,
) -> tuple[float, complex]:
    """Elapsed time ``I2 * integral dlam / mu`` along a path on the curve.

    ``path(s)`` returns ``(lam(s), dlam/ds)`` for an array of parameters;
    ``mu`` starts at ``mu_start`` and is continued along the path. Panels
    are doubled until successive Gauss-Legendre sums agree to ``tol``;
    returns the time and the continued ``mu`` at the end point.
    """
    s0, s1 = s_span
    if s0 == s1:
        return 0.0, mu_start
    prev, mu_end, ratio = _gl_panels(path, s0, s1, panels, spec, mu_start)
    n = panels
    while n < max_panels:
        n *= 2
        cur, mu_end, ratio = _gl_panels(path, s0, s1, n, spec, mu_start)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            if abs(cur.imag) > 1e3 * tol * max(1.0, abs(cur)):
                raise IntegrationError(f"elliptic time has imaginary part {cur.imag:.3e}")
            return float(I2 * cur.real), mu_end
        prev = cur
    raise IntegrationError(
        f"quadrature unresolved after {n} panels (closest approach to a branch point {ratio:.2e})"
    )


def hermite_path(t, lam, dlam):
    """Path callable over ``s = t`` from samples of ``lam(t)`` and exact derivatives."""
    t = np.asarray(t, float)
    re = CubicHermiteSpline(t, np.real(lam), np.real(dlam))
    im = CubicHermiteSpline(t, np.imag(lam), np.imag(dlam))

    def path(s):
        return re(s) + 1j * im(s), re(s, 1) + 1j * im(s, 1)

    return path


def divisor_path(traj, params: BodyParams3D):
    """``nu_lam`` and ``d nu_lam/dt`` from direct differentiation along a trajectory."""
    lam = np.empty(len(traj), complex)
    dlam = np.empty(len(traj), complex)
    mu = np.empty(len(traj), complex)
    for k, st in enumerate(traj.states()):
        fr = frame_transform(st, params)
        dx, dy = frame_derivatives(st, params)
        lam[k] = -fr.y / fr.x
        mu[k] = -fr.Omega(lam[k])
        dlam[k] = -(dy * fr.x - fr.y * dx) / fr.x**2
    return lam, dlam, mu


# ---------------------------------------------------------------------------
# inverse problem


@dataclass(frozen=True)
class Moduli:
    x2: float
    y2: float
    theta: float  # arg(y/x)
    s: float  # alpha g1 + beta g3
    residual: float  # size of the discarded imaginary part of s


def reconstruct_moduli(nu: DivisorPoint, spec: SpectralData3D, params: BodyParams3D) -> Moduli:
    """``|x|^2``, ``|y|^2`` and ``arg(y/x)`` from the divisor point and the curve."""
    I2 = params.I[1]
    R = float(np.hypot(params.r_C[0], params.r_C[2]))
    s_c = -1j * nu.mu - I2 * R * nu.lam**2
    s = float(s_c.real)
    # mu^2 - Omega^2 = -2 (|y|^2 + (y xb + x yb) lam + |x|^2 lam^2)
    x2 = 0.5 * (spec.D - 2 * I2 * R * s)
    y2 = 0.5 * (spec.F - s * s)
    if x2 < -1e-10 or y2 < -1e-10:
        raise ValueError(f"inconsistent moduli |x|^2={x2:.3e}, |y|^2={y2:.3e}")
    x2, y2 = max(x2, 0.0), max(y2, 0.0)
    re_yxb = spec.E / 4
    xy = np.sqrt(x2 * y2)
    if xy == 0.0:
        theta = 0.0
    else:
        al = abs(nu.lam)
        sin_th = -nu.lam.imag / al if al else 0.0
        theta = float(np.arctan2(sin_th, re_yxb / xy))
    return Moduli(float(x2), float(y2), theta, s, float(abs(s_c.imag)))


def riccati_coeffs(params: BodyParams3D, area: float) -> tuple[float, float]:
    """Constants ``(K, Q)`` of ``dphi/dt = (K - Q |x|^3 cos phi) / |x|^2``.

    ``area`` is the conserved ``<M, gamma>``. ``K = R <M, gamma> / 2`` with
    ``R = sqrt(x0^2 + z0^2)``, ``Q = sqrt(2) (beta/alpha) (1/I2 - 1/I1)``.
    """
    I1, I2, _ = params.I
    x0, _, z0 = params.r_C
    R = float(np.hypot(x0, z0))
    alpha, beta = x0 / R, z0 / R
    if alpha == 0:
        raise ValueError("alpha = 0: Q is undefined")
    return 0.5 * R * area, float(beta / alpha * SQRT2 * (1 / I2 - 1 / I1))


def phase_rhs(phi, xabs, K, Q):
    return (K - Q * xabs**3 * np.cos(phi)) / xabs**2


XAbs = Union[Callable[[float], float], tuple]


def _modulus_fn(xabs: XAbs) -> Callable[[float], float]:
    if callable(xabs):
        return xabs
    t, v = (np.asarray(a, float) for a in xabs)
    return CubicSpline(t, v)


def phase_flow(
    phi0: float,
    xabs: XAbs,
    K: float,
    Q: float,
    t_eval,
    tol: float = 1e-12,
    mode: str = "angle",
    switch: float = 10.0,
):
    """Integrate the phase ``phi_x(t)`` for a known modulus ``|x|(t)``.

    ``xabs`` is a callable or a ``(t, |x|)`` sample pair (cubic spline).
    ``mode="angle"`` integrates ``phi`` directly. ``mode="riccati"`` works
    in ``v = tan((phi - c)/2)`` with ``c`` a multiple of pi, which obeys

        v' = (f + s g) v^2 + (f - s g),   f = K/(2|x|^2), g = Q|x|/2, s = cos c,

    and recenters ``c`` whenever ``|v| > switch``. Returns the unwrapped phase.
    """
    t_eval = np.asarray(t_eval, float)
    m = _modulus_fn(xabs)

    def check(t, xa):
        if not xa > 0:
            raise ValueError(f"singular modulus |x|={xa!r} at t={t!r}")

    if mode == "angle":

        def f(t, y):
            xa = float(m(t))
            check(t, xa)
            return np.array([phase_rhs(y[0], xa, K, Q)])

        return dopri5(f, t_eval[0], [phi0], t_eval, tol, tol).y[:, 0]
    if mode != "riccati":
        raise ValueError(f"unknown mode {mode!r}")

    out = np.empty_like(t_eval)
    out[0] = phi0
    t0, phi = float(t_eval[0]), float(phi0)
    k = 1
    while k < t_eval.shape[0]:
        c = np.pi * np.round(phi / np.pi)
        sgn = 1.0 if int(np.round(phi / np.pi)) % 2 == 0 else -1.0
        v0 = np.tan(0.5 * (phi - c))

        def f(t, y, sgn=sgn):
            xa = float(m(t))
            check(t, xa)
            fk, gk = K / (2 * xa * xa), Q * xa / 2
            return np.array([(fk + sgn * gk) * y[0] ** 2 + (fk - sgn * gk)])

        sol = dopri5(f, t0, [v0], t_eval[k:], tol, tol, stop=lambda t, y: abs(y[0]) > switch)
        nk = sol.t.shape[0]
        out[k : k + nk] = c + 2 * np.arctan(sol.y[:, 0])
        k += nk
        t0, phi = sol.t_stop, c + 2 * np.arctan(sol.y_stop[0])
    return out


def reconstruct_state(moduli: Moduli, phi: float, params: BodyParams3D) -> EPState:
    """Rebuild ``(M, gamma)`` from ``|x|``, ``|y|``, ``arg(y/x)`` and ``phi_x = arg x``."""
    x0, _, z0 = params.r_C
    R = float(np.hypot(x0, z0))
    alpha, beta = x0 / R, z0 / R
    e1 = np.array([beta, 0.0, -alpha])
    e2 = np.array([0.0, 1.0, 0.0])
    rhat = np.array([alpha, 0.0, beta])
    x = np.sqrt(moduli.x2) * np.exp(1j * phi)
    y = np.sqrt(moduli.y2) * np.exp(1j * (phi + moduli.theta))
    M = SQRT2 * (x.real * e1 - x.imag * e2)
    g = moduli.s * rhat + SQRT2 * (y.real * e1 - y.imag * e2)
    return EPState.from_vectors(M, g)


def phase_oracle(states, params: BodyParams3D) -> np.ndarray:
    """Unwrapped ``atan2(-M2, beta M1 - alpha M3)`` along a list of states."""
    x0, _, z0 = params.r_C
    R = float(np.hypot(x0, z0))
    alpha, beta = x0 / R, z0 / R
    ph = [np.arctan2(-s.m_vec[1], beta * s.m_vec[0] - alpha * s.m_vec[2]) for s in states]
    return np.unwrap(ph)


def integral_values(state: EPState, params: BodyParams3D) -> dict[str, float]:
    """Energy, ``|gamma|^2``, ``<M, gamma>`` and the hypersurface value."""
    M, g = state.m_vec, state.g_vec
    w = (M - params.P) / params.I
    return {
        "energy": float(0.5 * (params.I * w) @ w + g @ params.r_C),
        "gamma_norm": float(g @ g),
        "area": float(M @ g),
        "hypersurface": hypersurface_value(state, params),
    }


@dataclass
class ReconstructionResult:
    t: np.ndarray
    direct: np.ndarray  # rows (M1, M2, M3, g1, g2, g3)
    recon: np.ndarray
    residuals: dict[str, np.ndarray]
    phase: np.ndarray
    phase_direct: np.ndarray

    @property
    def max_error(self) -> float:
        return float(np.max(np.abs(self.recon - self.direct)))

    @property
    def max_phase_error(self) -> float:
        return float(np.max(np.abs(self.phase - self.phase_direct)))


def reconstruct(
    params: BodyParams3D,
    state0: EPState,
    t_end: float,
    cadence: float = 0.01,
    tol: float = 1e-12,
    backend: Optional[str] = None,
) -> ReconstructionResult:
    """Simulate directly and rebuild the motion from the divisor flow and the phase.

    Only ``nu(0)``, the curve coefficients and ``phi_x(0)`` are taken from
    the initial state; everything after ``t = 0`` comes from the divisor
    flow, the moduli formulas and the phase equation.
    """
    t = sample_times(t_end, cadence)
    traj = integrate(params, state0, t_end, tol, t_eval=t, backend=backend)
    spec = spectral_coeffs_3d(params, state0)
    fr0 = frame_transform(state0, params)
    nu0 = divisor_point(fr0)
    lam, mu = flow_divisor(nu0, spec, params.I[1], t, tol)
    moduli = [
        reconstruct_moduli(DivisorPoint(l, m, _branch_of(m, spec.P4(l))), spec, params)
        for l, m in zip(lam, mu)
    ]
    K, Q = riccati_coeffs(params, spec.E / 2)
    xabs = np.sqrt([md.x2 for md in moduli])
    phi = phase_flow(float(np.angle(fr0.x)), (t, xabs), K, Q, t, tol)
    states = [reconstruct_state(md, p, params) for md, p in zip(moduli, phi)]
    recon = np.array([np.concatenate((s.m_vec, s.g_vec)) for s in states])
    ref = integral_values(state0, params)
    residuals = {key: np.empty(t.shape[0]) for key in ref}
    for k, s in enumerate(states):
        for key, v in integral_values(s, params).items():
            residuals[key][k] = v - ref[key]
    return ReconstructionResult(
        t, traj.y.copy(), recon, residuals, phi, phase_oracle(traj.states(), params)
    )
