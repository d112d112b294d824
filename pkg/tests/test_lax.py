import numpy as np
import pytest

from laxtop import apelrot, so4
from laxtop.dynamics import BodyParams3D, BodyParamsND, EPState
from laxtop.lax import (
    build_C,
    char_poly,
    det4,
    energy_form_D,
    lax_pair,
    lax_residual,
    mixed_pfaffian4,
    pfaffian4,
    spectral_coeffs_3d,
    spectral_invariants_nd,
)
from laxtop.lie import hat

from conftest import random_skew

LAMBDAS = np.linspace(-2, 2, 20)


def max_residual(params, state, C=None):
    return max(np.max(np.abs(lax_residual(params, state, lam, C))) for lam in LAMBDAS)


class TestLaxIdentity3D:
    def test_reference(self, ref_params, ref_state):
        assert max_residual(ref_params, ref_state) < 1e-13

    def test_random_hypersurface_states(self, rng):
        for _ in range(20):
            params = apelrot.sample_apelrot_params(rng)
            state = apelrot.sample_hypersurface_state(params, rng)
            assert max_residual(params, state) < 1e-12

    def test_off_hypersurface_fails(self, rng, ref_params):
        state = EPState.from_omega([0.1, 0.2, 0.3], [0.6, 0.48, 0.64], ref_params)
        assert abs(apelrot.hypersurface_value(state, ref_params)) > 0.1
        assert max_residual(ref_params, state) > 1e-3

    def test_non_apelrot_body_fails(self, rng):
        params = BodyParams3D([3, 2, 1], [1, 0, -1.5])
        state = apelrot.sample_hypersurface_state(params, rng)
        assert max_residual(params, state) > 1e-3

    def test_gyrostat(self, rng):
        P = np.array([0.2, 0.0, 0.1])
        for _ in range(10):
            params = apelrot.sample_apelrot_params(rng, P=P)
            state = apelrot.sample_hypersurface_state(params, rng)
            assert max_residual(params, state) < 1e-12

    def test_gyrostat_needs_p2_zero(self, rng):
        params = apelrot.sample_apelrot_params(rng, P=np.array([0.2, 0.3, 0.1]))
        state = apelrot.sample_hypersurface_state(params, rng)
        assert max_residual(params, state) > 1e-3

    def test_C_is_I2_rhat(self, ref_params):
        np.testing.assert_array_equal(build_C(ref_params), 2.0 * hat(ref_params.r_C))


class TestSpectralCurve:
    def test_char_poly_of_skew(self, rng):
        v = rng.normal(size=3)
        np.testing.assert_allclose(char_poly(hat(v)), [-1, 0, -(v @ v), 0], atol=1e-14)

    def test_coefficients_against_sampled_determinant(self, ref_params, ref_state):
        # fit |l(lam)|^2 over a grid; ground truth independent of the closed forms
        lp = lax_pair(ref_params, ref_state)
        lams = np.linspace(-1.5, 1.5, 9)
        vals = [-char_poly(lp.L(l))[2] for l in lams]
        fit = np.polyfit(lams, vals, 4)
        spec = spectral_coeffs_3d(ref_params, ref_state)
        np.testing.assert_allclose(fit, spec.as_array(), atol=1e-10)
        mu = 0.7 + 0.2j
        for l in lams[:3]:
            det = np.linalg.det(lp.L(l) - mu * np.eye(3))
            assert det == pytest.approx(-mu * (mu**2 - spec.P4(l)), abs=1e-12)

    def test_reference_values(self, ref_params, ref_state):
        spec = spectral_coeffs_3d(ref_params, ref_state)
        assert spec.A == pytest.approx(16.0, abs=1e-14)
        assert abs(spec.B) < 1e-15
        assert spec.F == pytest.approx(1.0, abs=1e-15)

    def test_b_vanishes_exactly_on_hypersurface(self, rng):
        params = apelrot.sample_apelrot_params(rng)
        state = apelrot.sample_hypersurface_state(params, rng)
        assert abs(spectral_coeffs_3d(params, state).B) < 1e-13

    def test_energy_form(self, rng):
        for _ in range(50):
            params = apelrot.sample_apelrot_params(rng)
            state = apelrot.sample_hypersurface_state(params, rng)
            assert energy_form_D(params, state) == pytest.approx(spectral_coeffs_3d(params, state).D, abs=1e-12)

    def test_dP4(self, ref_params, ref_state):
        spec = spectral_coeffs_3d(ref_params, ref_state)
        h = 1e-6
        for l in (0.3, -1.2 + 0.4j):
            fd = (spec.P4(l + h) - spec.P4(l - h)) / (2 * h)
            assert spec.dP4(l) == pytest.approx(fd, rel=1e-8)


class TestPfaffian:
    def test_square_is_determinant(self, rng):
        for _ in range(20):
            A = random_skew(rng, 4)
            assert pfaffian4(A) ** 2 == pytest.approx(det4(A), rel=1e-12)
            assert det4(A) == pytest.approx(np.linalg.det(A), rel=1e-10)

    def test_mixed_is_polarization(self, rng):
        A, B = random_skew(rng, 4), random_skew(rng, 4)
        assert mixed_pfaffian4(A, B) == pytest.approx(pfaffian4(A + B) - pfaffian4(A) - pfaffian4(B))
        assert mixed_pfaffian4(A, A) == pytest.approx(2 * pfaffian4(A))

    def test_shape(self):
        with pytest.raises(ValueError):
            pfaffian4(np.zeros((3, 3)))


class TestSo4Lax:
    @pytest.fixture
    def case(self):
        return so4.So4CaseParams(1.0, 2.0, 1.0, 0.5)

    def test_identity(self, rng, case):
        body = case.body()
        np.testing.assert_allclose(build_C(body), case.C)
        for _ in range(10):
            s = EPState(random_skew(rng, 4), random_skew(rng, 4))
            assert max_residual(body, s) < 1e-12

    def test_unrepresentable_body(self, rng):
        body = BodyParamsND([1.0, 1.5, 2.0, 2.5], random_skew(rng, 4))
        with pytest.raises(ValueError):
            build_C(body)

    def test_invariants_match_sampling(self, rng, case):
        body = case.body()
        s = EPState(random_skew(rng, 4), random_skew(rng, 4))
        inv = spectral_invariants_nd(body, s)
        lp = lax_pair(body, s)
        lams = np.linspace(-1, 1, 9)
        tr = np.polyfit(lams, [np.trace(lp.L(l) @ lp.L(l)) for l in lams], 4)
        pf = np.polyfit(lams, [pfaffian4(lp.L(l)) for l in lams], 4)
        np.testing.assert_allclose(tr, [inv[f"tr2_{k}"] for k in range(4, -1, -1)], atol=1e-10)
        np.testing.assert_allclose(pf, [inv[f"pf_{k}"] for k in range(4, -1, -1)], atol=1e-10)

    def test_coefficient_dictionary(self, rng, case):
        body = case.body()
        s = EPState(random_skew(rng, 4), random_skew(rng, 4))
        inv = spectral_invariants_nd(body, s)
        J1, J2, J3, J4 = so4.casimirs(s.M, s.G)
        F1, F2, F3, F4 = so4.integrals(s.M, s.G, case.C)
        assert inv["tr2_3"] == pytest.approx(-4 * F1)
        assert inv["tr2_2"] == pytest.approx(-2 * F4)
        assert inv["tr2_1"] == pytest.approx(-4 * J4)
        assert inv["tr2_0"] == pytest.approx(-2 * J3)
        assert inv["pf_3"] == pytest.approx(F2)
        assert inv["pf_2"] == pytest.approx(F3)
        assert inv["pf_1"] == pytest.approx(J1)
        assert inv["pf_0"] == pytest.approx(J2)

    def test_needs_n4(self, rng):
        body = BodyParamsND([1, 1, 1], hat([1.0, 0, 0]))
        with pytest.raises(ValueError):
            spectral_invariants_nd(body, EPState(random_skew(rng, 3), random_skew(rng, 3)))
