"""The four-dimensional integrable case with I = diag(a, a, b, b) and X supported on (1,2), (3,4).

Also hosts the classification of inertia/X patterns for which the Lax form
``d/dt L = [L, lam X + Omega]``, ``L = lam^2 C + lam M + Gamma``, holds.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from laxtop.dynamics import BodyParamsND, EPState, drift_report, integrate
from laxtop.lax import mixed_pfaffian4, pfaffian4
from laxtop.lie import GradientPair, coords_to_skew, index_pairs, lie_poisson_bracket, skew_to_coords

__all__ = [
    "ALL_NAMES",
    "CASIMIR_NAMES",
    "INTEGRAL_NAMES",
    "So4CaseParams",
    "Verdict",
    "analytic_gradients",
    "casimirs",
    "classification_scan",
    "classify",
    "classify_pattern",
    "conservation_run",
    "eight_quantities",
    "hamiltonian",
    "hamiltonian_brackets",
    "integrals",
    "involution_table",
    "lax_integrals",
    "set_partitions",
    "star",
]

CASIMIR_NAMES = ("J1", "J2", "J3", "J4")
INTEGRAL_NAMES = ("F1", "F2", "F3", "F4")
ALL_NAMES = CASIMIR_NAMES + INTEGRAL_NAMES


@dataclass(frozen=True)
class So4CaseParams:
    a: float
    b: float
    X12: float
    X34: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("a and b must be positive")
        if self.X12 == 0 or self.X34 == 0:
            raise ValueError("X12 and X34 must be nonzero")

    @property
    def X(self) -> np.ndarray:
        X = np.zeros((4, 4))
        X[0, 1], X[2, 3] = self.X12, self.X34
        return X - X.T

    @property
    def C(self) -> np.ndarray:
        return (self.a + self.b) * self.X

    def body(self) -> BodyParamsND:
        return BodyParamsND(np.array([self.a, self.a, self.b, self.b]), self.X)


def _pairs_dict(A: np.ndarray) -> dict[str, float]:
    return {f"{i + 1}{j + 1}": float(A[i, j]) for i, j in index_pairs(4)}


def casimirs(M, G) -> tuple[float, float, float, float]:
    m, g = _pairs_dict(np.asarray(M)), _pairs_dict(np.asarray(G))
    J1 = (
        m["34"] * g["12"] + m["12"] * g["34"] + m["14"] * g["23"]
        + m["23"] * g["14"] - m["24"] * g["13"] - m["13"] * g["24"]
    )
    J2 = g["34"] * g["12"] + g["23"] * g["14"] - g["13"] * g["24"]
    J3 = sum(v * v for v in g.values())
    J4 = sum(m[k] * g[k] for k in m)
    return J1, J2, J3, J4


def integrals(M, G, C) -> tuple[float, float, float, float]:
    """Coordinate forms of the four integrals; only ``C12`` and ``C34`` enter."""
    m, g = _pairs_dict(np.asarray(M)), _pairs_dict(np.asarray(G))
    C12, C34 = float(C[0, 1]), float(C[2, 3])
    F1 = C12 * m["12"] + C34 * m["34"]
    F2 = C34 * m["12"] + C12 * m["34"]
    F3 = m["12"] * m["34"] + m["23"] * m["14"] - m["13"] * m["24"] + C34 * g["12"] + C12 * g["34"]
    F4 = sum(v * v for v in m.values()) + 2 * C12 * g["12"] + 2 * C34 * g["34"]
    return F1, F2, F3, F4


def _dot(A, B) -> float:
    return 0.5 * float(np.sum(A * B))


def lax_integrals(M, G, C) -> tuple[float, float, float, float]:
    """Coordinate-free forms of F1..F4 valid for any constant ``C``.

    ``<C,M>``, ``Pf(C;M)``, ``Pf(M) + Pf(C;G)``, ``<M,M> + 2<C,G>``; they
    reduce to :func:`integrals` when ``C`` lives on (1,2), (3,4).
    """
    M, G, C = (np.asarray(A, dtype=float) for A in (M, G, C))
    return (
        _dot(C, M),
        mixed_pfaffian4(C, M),
        pfaffian4(M) + mixed_pfaffian4(C, G),
        _dot(M, M) + 2 * _dot(C, G),
    )


def hamiltonian(M, G, params: BodyParamsND) -> float:
    """``<M, Omega>/2 + <Gamma, X>``, the generator of the flow under the Lie-Poisson bracket."""
    M = np.asarray(M, dtype=float)
    sums = params.I[:, None] + params.I[None, :]
    np.fill_diagonal(sums, 1.0)
    return 0.5 * _dot(M, M / sums) + _dot(np.asarray(G), params.X)


_STAR = np.array([5, 4, 3, 2, 1, 0])
_STAR_SIGN = np.array([1.0, -1.0, 1.0, 1.0, -1.0, 1.0])


def star(A) -> np.ndarray:
    """Gradient of the Pfaffian: ``d Pf(A)[B] = <star(A), B>`` on so(4)."""
    c = skew_to_coords(A)
    return coords_to_skew(_STAR_SIGN * c[_STAR])


def analytic_gradients(which: str, M, G, C=None, params: Optional[BodyParamsND] = None) -> GradientPair:
    """Closed-form ``(d1, d2)`` for J1..J4, F1..F4 (coordinate-free forms) and H."""
    M = np.asarray(M, dtype=float)
    G = np.asarray(G, dtype=float)
    Z = np.zeros((4, 4))
    if which == "H":
        if params is None:
            raise ValueError("gradient of H needs params")
        sums = params.I[:, None] + params.I[None, :]
        np.fill_diagonal(sums, 1.0)
        return GradientPair(M / sums, params.X.copy())
    if which in CASIMIR_NAMES:
        return {
            "J1": lambda: GradientPair(star(G), star(M)),
            "J2": lambda: GradientPair(Z, star(G)),
            "J3": lambda: GradientPair(Z, 2 * G),
            "J4": lambda: GradientPair(G.copy(), M.copy()),
        }[which]()
    if which in INTEGRAL_NAMES:
        if C is None:
            raise ValueError(f"gradient of {which} needs C")
        C = np.asarray(C, dtype=float)
        return {
            "F1": lambda: GradientPair(C.copy(), Z),
            "F2": lambda: GradientPair(star(C), Z),
            "F3": lambda: GradientPair(star(M), star(C)),
            "F4": lambda: GradientPair(2 * M, 2 * C),
        }[which]()
    raise KeyError(which)


def involution_table(M, G, C) -> np.ndarray:
    """8x8 brackets among J1..J4, F1..F4 (in that order) at the point ``(M, G)``."""
    grads = [analytic_gradients(name, M, G, C) for name in ALL_NAMES]
    T = np.zeros((8, 8))
    for i, j in itertools.combinations(range(8), 2):
        T[i, j] = lie_poisson_bracket(grads[i], grads[j], (M, G))
        T[j, i] = -T[i, j]
    return T


def hamiltonian_brackets(M, G, C, params: BodyParamsND) -> dict[str, float]:
    """``{Q, H}`` for each of the eight quantities; equals ``dQ/dt`` along the flow."""
    gH = analytic_gradients("H", M, G, params=params)
    return {
        name: lie_poisson_bracket(analytic_gradients(name, M, G, C), gH, (M, G))
        for name in ALL_NAMES
    }


def eight_quantities(M, G, C) -> dict[str, float]:
    return dict(zip(ALL_NAMES, casimirs(M, G) + integrals(M, G, C)))


def conservation_run(
    params: BodyParamsND,
    state0: EPState,
    t_end: float,
    tol: float = 1e-10,
    C=None,
    cadence: Optional[float] = None,
    backend: Optional[str] = None,
):
    """Integrate the flow and report drift of J1..J4 and F1..F4."""
    if C is None:
        C = (params.I[0] + params.I[2]) * params.X
    traj = integrate(params, state0, t_end, tol, cadence=cadence, backend=backend)
    quantities = [
        (name, (lambda k: lambda s, t: (casimirs(s.M, s.G) + integrals(s.M, s.G, C))[k])(k))
        for k, name in enumerate(ALL_NAMES)
    ]
    return traj, drift_report(traj, quantities)


# ---------------------------------------------------------------------------
# classification


@dataclass
class Verdict:
    """Outcome of the Lax-form test for one body.

    ``label`` is one of ``symmetric``, ``lagrange``, ``so4_case``,
    ``other`` (representable but unnamed) or ``not_representable``.
    ``witness`` is a one-based ``(i, j, k)`` triple: for a failure the
    index k at which the two sides of ``C_ij = (I_i+I_k) X_ij = (I_j+I_k) X_ij``
    disagree, for a success any triple used to fix a nonzero ``C_ij``.
    """

    label: str
    C: Optional[np.ndarray] = None
    witness: Optional[tuple[int, int, int]] = None
    reason: str = ""
    checks: dict = field(default_factory=dict)


def classify(I, X, rtol: float = 1e-10) -> Verdict:
    """Decide whether a constant C makes the Lax form equivalent to the equations of motion.

    Requires ``X12 != 0``. Solves ``C_ij = (I_i+I_k) X_ij = (I_j+I_k) X_ij``
    for all ``k != i, j`` and then checks ``[C, X] = 0``.
    """
    I = np.asarray(I, dtype=float)
    X = np.asarray(X, dtype=float)
    n = I.shape[0]
    if X.shape != (n, n):
        raise ValueError("X must be n x n")
    xs = np.max(np.abs(X))
    if X[0, 1] == 0 or xs == 0:
        raise ValueError("classification assumes X12 != 0")
    scale = float(np.max(np.abs(I)))
    C = np.zeros((n, n))
    witness = None
    Xv = X.tolist()
    I = I.tolist()
    for i, j in index_pairs(n):
        if abs(Xv[i][j]) <= rtol * xs:
            continue
        others = [k for k in range(n) if k != i and k != j]
        k0 = others[0]
        ref = I[i] + I[k0]
        tol = rtol * (scale + abs(ref))
        for k in others:
            if abs(I[i] + I[k] - ref) > tol:
                return Verdict(
                    "not_representable", witness=(i + 1, j + 1, k + 1),
                    reason=f"I{i + 1}+I{k + 1} != I{i + 1}+I{k0 + 1} for C{i + 1}{j + 1}",
                )
            if abs(I[j] + I[k] - ref) > tol:
                return Verdict(
                    "not_representable", witness=(i + 1, j + 1, k + 1),
                    reason=f"I{j + 1}+I{k + 1} != I{i + 1}+I{k0 + 1} for C{i + 1}{j + 1}",
                )
        C[i, j] = ref * X[i, j]
        C[j, i] = -C[i, j]
        if witness is None:
            witness = (i + 1, j + 1, k0 + 1)
    CX = C @ X - X @ C
    if np.max(np.abs(CX)) > rtol * max(1.0, float(np.max(np.abs(C))) * xs):
        return Verdict("not_representable", witness=witness, reason="[C, X] != 0")

    support = {(i, j) for i, j in index_pairs(n) if abs(Xv[i][j]) > rtol * xs}
    if max(I) - min(I) <= rtol * scale:
        label = "symmetric"
    elif support == {(0, 1)}:
        label = "lagrange"
    elif n == 4 and support == {(0, 1), (2, 3)}:
        label = "so4_case"
    else:
        label = "other"
    return Verdict(label, C=C, witness=witness, reason="Lax form closes")


def set_partitions(n: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    """All set partitions of ``range(n)``, blocks sorted by smallest element."""

    def rec(k: int, blocks: list[list[int]]):
        if k == n:
            yield tuple(tuple(b) for b in blocks)
            return
        for b in blocks:
            b.append(k)
            yield from rec(k + 1, blocks)
            b.pop()
        blocks.append([k])
        yield from rec(k + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


def _instantiate(n, partition, support, rng):
    nb, ns = len(partition), len(support)
    u = rng.random(2 * nb + 2 * ns).tolist()
    # distinct block values: a random permutation of 1..nb plus jitter < 0.5
    order = sorted(range(nb), key=u.__getitem__)
    I = [0.0] * n
    for rank, b in enumerate(order):
        for i in partition[b]:
            I[i] = rank + 1.0 + 0.5 * u[nb + b]
    X = np.zeros((n, n))
    for k, (i, j) in enumerate(support):
        m = 0.5 + u[2 * nb + k]
        if u[2 * nb + ns + k] < 0.5:
            m = -m
        X[i, j] = m
        X[j, i] = -m
    return np.array(I), X


def classify_pattern(n: int, partition, support: Sequence[tuple[int, int]], rng, draws: int = 2) -> Verdict:
    """Classify a multiplicity pattern by independent random instantiations.

    ``partition`` groups equal moments (zero-based blocks); ``support`` lists
    the zero-based pairs where X is nonzero and must include (0, 1).
    """
    if (0, 1) not in set(map(tuple, support)):
        raise ValueError("support must contain (0, 1)")
    verdicts = [classify(*_instantiate(n, partition, support, rng)) for _ in range(draws)]
    labels = {v.label for v in verdicts}
    if len(labels) != 1:
        raise RuntimeError(f"random instantiations disagree on pattern {partition}/{support}: {labels}")
    return verdicts[0]


def _fmt_partition(partition) -> str:
    return "|".join("".join(str(i + 1) for i in b) for b in partition)


def _fmt_support(support) -> str:
    return ",".join(f"{i + 1}{j + 1}" for i, j in sorted(support))


def classification_scan(n: int, seed: int = 0) -> dict:
    """Census of every inertia multiplicity pattern and X support containing X12.

    Partitions that already fail the (1,2) condition fail for every support
    and are reported once with that counter-witness.
    """
    if n not in (3, 4, 5, 6):
        raise ValueError("scan supports n in {3, 4, 5, 6}")
    rng = np.random.default_rng(seed)
    rest = [p for p in index_pairs(n) if p != (0, 1)]
    rows = []
    families = set()
    for partition in set_partitions(n):
        base = classify_pattern(n, partition, [(0, 1)], rng)
        if base.label == "not_representable":
            rows.append({
                "pattern": _fmt_partition(partition), "support": "any containing 12",
                "verdict": base.label, "witness": list(base.witness), "C": None,
            })
            continue
        for r in range(len(rest) + 1):
            for extra in itertools.combinations(rest, r):
                support = [(0, 1), *extra]
                v = classify_pattern(n, partition, support, rng)
                row = {
                    "pattern": _fmt_partition(partition), "support": _fmt_support(support),
                    "verdict": v.label, "witness": list(v.witness) if v.witness else None,
                    "C": None,
                }
                if v.C is not None:
                    families.add(v.label)
                    row["C"] = {f"{i + 1}{j + 1}": float(v.C[i, j]) for i, j in support}
                rows.append(row)
    expected = {"lagrange", "symmetric"} | ({"so4_case"} if n == 4 else set())
    return {
        "n": n,
        "families": sorted(families),
        "expected": sorted(expected),
        "ok": families == expected,
        "rows": rows,
    }
