import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from laxtop.lie import (
    GradientPair,
    as_skew,
    commutator,
    coord_labels,
    coords_to_skew,
    hat,
    index_pairs,
    lie_poisson_bracket,
    pairing,
    skew_to_coords,
    unhat,
)

from conftest import random_skew

vec3 = arrays(np.float64, 3, elements=st.floats(-10, 10, allow_nan=False))


class TestHat:
    @given(vec3, vec3)
    def test_hat_is_cross_product(self, v, w):
        np.testing.assert_allclose(hat(v) @ w, np.cross(v, w), atol=1e-12)

    def test_sign_convention(self):
        H = hat([1.0, 0.0, 0.0])
        assert H[2, 1] == 1.0 and H[1, 2] == -1.0

    @given(vec3)
    def test_roundtrip(self, v):
        np.testing.assert_array_equal(unhat(hat(v)), v)

    @given(vec3, vec3)
    def test_commutator_maps_to_cross(self, v, w):
        np.testing.assert_allclose(unhat(commutator(hat(v), hat(w))), np.cross(v, w), atol=1e-10)

    @given(vec3, vec3)
    def test_pairing_is_dot(self, v, w):
        assert pairing(hat(v), hat(w)) == pytest.approx(float(v @ w), abs=1e-10)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            hat([1.0, 2.0])
        with pytest.raises(ValueError):
            unhat(np.zeros((4, 4)))


class TestSkew:
    def test_as_skew_rejects_symmetric_part(self):
        with pytest.raises(ValueError):
            as_skew(np.eye(3))

    def test_commutator_dimension_mismatch(self):
        with pytest.raises(ValueError):
            commutator(np.zeros((3, 3)), np.zeros((4, 4)))

    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_jacobi(self, rng, n):
        A, B, C = (random_skew(rng, n) for _ in range(3))
        J = commutator(A, commutator(B, C)) + commutator(B, commutator(C, A)) + commutator(C, commutator(A, B))
        assert np.max(np.abs(J)) < 1e-12

    @pytest.mark.parametrize("n", [4, 5, 6])
    def test_pair_coordinates_roundtrip(self, rng, n):
        A = random_skew(rng, n)
        c = skew_to_coords(A)
        assert c.shape == (n * (n - 1) // 2,)
        np.testing.assert_array_equal(coords_to_skew(c), A)
        # lexicographic charts are orthonormal for the pairing
        assert pairing(A, A) == pytest.approx(float(c @ c))

    def test_labels(self):
        assert coord_labels(4) == ["12", "13", "14", "23", "24", "34"]
        assert index_pairs(3) == ((0, 1), (0, 2), (1, 2))

    def test_n3_uses_hat_coordinates(self, rng):
        v = rng.normal(size=3)
        np.testing.assert_array_equal(skew_to_coords(hat(v)), v)


def _grad_fd(f, M, G, h=1e-6):
    n = M.shape[0]
    out = []
    for which in (0, 1):
        g = np.zeros((n, n))
        for i, j in index_pairs(n):
            E = np.zeros((n, n))
            E[i, j], E[j, i] = 1, -1
            args_p = [M, G]
            args_m = [M, G]
            args_p[which] = args_p[which] + h * E
            args_m[which] = args_m[which] - h * E
            g[i, j] = (f(*args_p) - f(*args_m)) / (2 * h)
            g[j, i] = -g[i, j]
        out.append(g)
    return GradientPair(*out)


class TestBracket:
    def test_antisymmetric_and_casimirs(self, rng):
        M, G = hat(rng.normal(size=3)), hat(rng.normal(size=3))
        f = GradientPair(random_skew(rng, 3), random_skew(rng, 3))
        g = GradientPair(random_skew(rng, 3), random_skew(rng, 3))
        assert lie_poisson_bracket(f, g, (M, G)) == pytest.approx(-lie_poisson_bracket(g, f, (M, G)))
        # |gamma|^2 and <M, gamma> are Casimirs of the semidirect bracket
        gam2 = GradientPair(np.zeros((3, 3)), 2 * G)
        area = GradientPair(G, M)
        for c in (gam2, area):
            assert abs(lie_poisson_bracket(c, f, (M, G))) < 1e-12

    @pytest.mark.parametrize("n", [3, 4])
    def test_hamiltonian_generates_flow(self, rng, n):
        from laxtop.dynamics import BodyParamsND, EPState, ep_rhs

        I = rng.uniform(1, 2, n)
        X = random_skew(rng, n)
        params = BodyParamsND(I, X)
        st_ = EPState(random_skew(rng, n), random_skew(rng, n))
        sums = I[:, None] + I[None, :]
        np.fill_diagonal(sums, 1.0)
        H = GradientPair(st_.M / sums, X)
        dM, dG = ep_rhs(st_, params)
        # df/dt = {f, H} for linear f = <A, M> + <B, G>
        A, B = random_skew(rng, n), random_skew(rng, n)
        expected = pairing(A, dM) + pairing(B, dG)
        got = lie_poisson_bracket(GradientPair(A, B), H, (st_.M, st_.G))
        assert got == pytest.approx(expected, rel=1e-10, abs=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_jacobi_identity_for_brackets(self, seed):
        # Jacobi on quadratic functions evaluated through finite-difference gradients
        rng = np.random.default_rng(seed)
        n = 3
        Qs = [(random_skew(rng, n), random_skew(rng, n)) for _ in range(3)]

        def make(A, B):
            return lambda M, G: pairing(A, M) * pairing(B, G)

        fs = [make(*q) for q in Qs]
        M, G = random_skew(rng, n), random_skew(rng, n)

        def br(f, g):
            return lambda M_, G_: lie_poisson_bracket(_grad_fd(f, M_, G_), _grad_fd(g, M_, G_), (M_, G_))

        terms = [
            lie_poisson_bracket(_grad_fd(fs[a], M, G), _grad_fd(br(fs[b], fs[c]), M, G, 1e-3), (M, G))
            for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1))
        ]
        assert abs(sum(terms)) <= 1e-6 * (1.0 + sum(abs(t) for t in terms))

    def test_dimension_mismatch(self):
        f = GradientPair(np.zeros((3, 3)), np.zeros((3, 3)))
        g = GradientPair(np.zeros((4, 4)), np.zeros((4, 4)))
        with pytest.raises(ValueError):
            lie_poisson_bracket(f, g, (np.zeros((3, 3)), np.zeros((3, 3))))
