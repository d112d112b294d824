"""Euler-Poisson equations for the heavy top, the gyrostat and the n-dimensional body.

Three-dimensional bodies use the principal-frame vector form::

    dM/dt = M x omega + gamma x r_C,    dgamma/dt = gamma x omega,
    M = I omega + P

which under ``hat`` is the commutator form on so(3) x so(3). The
n-dimensional body uses ``M = I Omega + Omega I`` and a constant
``X`` in so(n).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from laxtop import _backend
from laxtop._rk import IntegrationError, StepSizeUnderflow
from laxtop.lie import as_skew, commutator, coord_labels, hat, index_pairs, unhat

__all__ = [
    "BodyParams3D",
    "BodyParamsND",
    "DriftRow",
    "EPState",
    "IntegrationError",
    "StepSizeUnderflow",
    "Trajectory",
    "drift_report",
    "ep_rhs",
    "integrate",
    "omega_from_M",
]


def _vec3(v) -> np.ndarray:
    v = np.array(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class BodyParams3D:
    """Principal moments ``I``, weighted mass-center offset ``r_C`` and rotor momentum ``P``."""

    I: np.ndarray
    r_C: np.ndarray
    P: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("I", "r_C", "P"):
            object.__setattr__(self, name, _vec3(getattr(self, name)))
        if np.any(self.I <= 0):
            raise ValueError(f"moments of inertia must be positive, got {self.I}")

    n = 3

    @property
    def is_gyrostat(self) -> bool:
        return bool(np.any(self.P != 0.0))

    @property
    def R(self) -> np.ndarray:
        return hat(self.r_C)

    def kernel_params(self) -> np.ndarray:
        return np.concatenate((self.I, self.r_C, self.P))


@dataclass(frozen=True, eq=False)
class BodyParamsND:
    """Diagonal inertia ``I`` (length n) and constant ``X`` in so(n)."""

    I: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        inertia = np.array(self.I, dtype=float)
        if inertia.ndim != 1 or inertia.shape[0] < 3:
            raise ValueError("I must be a vector of length n >= 3")
        X = as_skew(self.X)
        if X.shape[0] != inertia.shape[0]:
            raise ValueError("X and I disagree on the dimension")
        sums = inertia[:, None] + inertia[None, :]
        if np.any(sums[np.triu_indices(inertia.shape[0], 1)] <= 0):
            raise ValueError("principal inertia momenta I_i + I_j must be positive")
        inertia.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "I", inertia)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.I.shape[0]

    @property
    def R(self) -> np.ndarray:
        return self.X


Params = Union[BodyParams3D, BodyParamsND]


@dataclass(frozen=True, eq=False)
class EPState:
    """Phase-space point: momentum ``M`` and ``G`` (gamma or Gamma), both in so(n)."""

    M: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        M, G = as_skew(self.M), as_skew(self.G)
        if M.shape != G.shape:
            raise ValueError("M and G must have the same dimension")
        M.setflags(write=False)
        G.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "G", G)

    @classmethod
    def from_vectors(cls, M, gamma) -> "EPState":
        return cls(hat(M), hat(gamma))

    @classmethod
    def from_omega(cls, omega, gamma, params: BodyParams3D) -> "EPState":
        return cls.from_vectors(params.I * np.asarray(omega, float) + params.P, gamma)

    @classmethod
    def from_flat(cls, y: np.ndarray, n: int) -> "EPState":
        if n == 3:
            return cls(hat(y[:3]), hat(y[3:]))
        m = n * (n - 1) // 2
        return cls(_from_pairs(y[:m], n), _from_pairs(y[m:], n))

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def m_vec(self) -> np.ndarray:
        return unhat(self.M)

    @property
    def g_vec(self) -> np.ndarray:
        return unhat(self.G)

    def flat(self) -> np.ndarray:
        """Integrator state: vectors for n=3, lexicographic pair entries otherwise."""
        if self.n == 3:
            return np.concatenate((unhat(self.M), unhat(self.G)))
        ii, jj = zip(*index_pairs(self.n))
        return np.concatenate((self.M[ii, jj], self.G[ii, jj]))


def _from_pairs(c: np.ndarray, n: int) -> np.ndarray:
    A = np.zeros((n, n))
    ii, jj = zip(*index_pairs(n))
    A[ii, jj] = c
    A[jj, ii] = -np.asarray(c)
    return A


def omega_from_M(M, params: Params) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape[0] != params.n:
        raise ValueError(f"M is {M.shape[0]}-dimensional, params are {params.n}-dimensional")
    if isinstance(params, BodyParams3D):
        return hat((unhat(M) - params.P) / params.I)
    sums = params.I[:, None] + params.I[None, :]
    np.fill_diagonal(sums, 1.0)
    return M / sums


def ep_rhs(state: EPState, params: Params) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives ``([M, W] + [G, R], [G, W])`` with ``W`` the angular velocity."""
    if state.n != params.n:
        raise ValueError("state and params dimensions differ")
    W = omega_from_M(state.M, params)
    return commutator(state.M, W) + commutator(state.G, params.R), commutator(state.G, W)


@dataclass
class Trajectory:
    """Sampled solution. ``y`` holds flat states, one row per sample time."""

    params: Params
    t: np.ndarray
    y: np.ndarray
    nsteps: int = 0
    nrejected: int = 0
    tol: float = 0.0
    backend: str = ""

    def __len__(self) -> int:
        return self.t.shape[0]

    def state(self, k: int) -> EPState:
        return EPState.from_flat(self.y[k], self.params.n)

    def states(self) -> list[EPState]:
        return [self.state(k) for k in range(len(self))]

    def columns(self) -> list[str]:
        n = self.params.n
        if n == 3:
            return ["M1", "M2", "M3", "g1", "g2", "g3"]
        labels = coord_labels(n)
        return [f"M{l}" for l in labels] + [f"G{l}" for l in labels]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + self.columns())
            for t, row in zip(self.t, self.y):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def sample_times(t_end: float, cadence: Optional[float]) -> np.ndarray:
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    if t_end == 0:
        return np.array([0.0])
    if cadence is None:
        cadence = t_end / 100
    k = max(1, int(np.ceil(t_end / cadence - 1e-9)))
    return np.linspace(0.0, t_end, k + 1)


def integrate(
    params: Params,
    state0: EPState,
    t_end: float,
    tol: float = 1e-10,
    *,
    cadence: Optional[float] = None,
    t_eval: Optional[Sequence[float]] = None,
    atol: Optional[float] = None,
    backend: Optional[str] = None,
) -> Trajectory:
    """Integrate the Euler-Poisson equations with adaptive Dormand-Prince 5(4).

    Samples are taken at ``t_eval`` if given, else every ``cadence`` up to
    ``t_end``. ``tol`` is the relative tolerance; ``atol`` defaults to it.
    """
    if not 1e-14 <= tol <= 1e-3:
        raise ValueError(f"tol must lie in [1e-14, 1e-3], got {tol}")
    if state0.n != params.n:
        raise ValueError("state and params dimensions differ")
    if t_eval is None:
        times = sample_times(t_end, cadence)
    else:
        times = np.asarray(t_eval, dtype=float)
        if times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
            raise ValueError("t_eval must be strictly increasing and start at t >= 0")
    atol = tol if atol is None else atol
    name = backend or _backend.DEFAULT
    kern = _backend.get(name)
    y0 = state0.flat()
    if isinstance(params, BodyParams3D):
        sol = kern.integrate_ep3(params.kernel_params(), y0, times, tol, atol)
    else:
        sol = kern.integrate_epn(params.I, params.X, y0, times, tol, atol)
    return Trajectory(params, np.asarray(sol.t), sol.y, sol.nsteps, sol.nrejected, tol, name)


@dataclass(frozen=True, eq=False)
class DriftRow:
    name: str
    max_abs: float
    max_rel: float
    initial: float


def drift_report(
    traj: Trajectory,
    quantities: Mapping[str, Callable[..., float]] | Iterable[tuple[str, Callable[..., float]]],
) -> list[DriftRow]:
    """Worst-case deviation of each quantity from its initial value.

    Each quantity is called as ``q(state, t)``. Relative drift divides by
    ``|Q(0)|`` when that is nonzero and equals the absolute drift otherwise.
    """
    items = quantities.items() if isinstance(quantities, Mapping) else quantities
    states = traj.states()
    rows = []
    for name, q in items:
        vals = np.array([q(s, t) for s, t in zip(states, traj.t)], dtype=float)
        dev = float(np.max(np.abs(vals - vals[0])))
        q0 = float(vals[0])
        rows.append(DriftRow(name, dev, dev / abs(q0) if q0 != 0 else dev, q0))
    return rows
