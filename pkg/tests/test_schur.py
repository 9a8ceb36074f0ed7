import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import eval_legendre

from qrecur.errors import DomainError, NotSchurClassError, PoleError, WindingUndefinedError
from qrecur.schur import (
    PowerSeries,
    SchurParams,
    caratheodory_transforms,
    eval_schur,
    inverse_iterate,
    iterate,
    khrushchev_Fk,
    khrushchev_G,
    l2_norm_sq,
    schur_params_from_taylor,
    series_div,
    series_mul,
    szego_polynomials,
    tau_r,
    taylor_coeffs,
    winding_number,
)
from strategies import coin_params, disk_point

CIRCLE = np.exp(2j * np.pi * np.arange(256) / 256)


def blaschke(zeros, phase=1.0):
    """Finite Blaschke product as a callable and as numerator/denominator polynomials."""
    num = np.array([phase], dtype=complex)
    den = np.array([1.0], dtype=complex)
    for a in zeros:
        num = np.convolve(num, [-a, 1.0])
        den = np.convolve(den, [1.0, -np.conj(a)])
    return (lambda z: np.polyval(num[::-1], z) / np.polyval(den[::-1], z)), num, den


class TestEvaluation:
    def test_zero_function(self):
        assert eval_schur(SchurParams(), 0.3 + 0.4j) == 0

    def test_constant_terminator(self):
        assert eval_schur(SchurParams((), terminator=1j), 0.5) == 1j

    def test_single_factor_is_inner(self):
        g = 0.4 - 0.3j
        p = SchurParams((-np.conj(g),), terminator=1.0)
        assert np.abs(np.abs(eval_schur(p, CIRCLE)) - 1).max() < 1e-12

    def test_outside_disk_is_refused(self):
        with pytest.raises(DomainError):
            eval_schur(SchurParams((0.1,)), 1.01)

    def test_truncation_bound_is_reported(self):
        p = SchurParams.constant_rule(0.5)
        val, bound = eval_schur(p, 0.5, depth=20, return_bound=True)
        assert bound == pytest.approx(2 * 0.5 ** 20)
        assert abs(val - eval_schur(p, 0.5)) <= bound

    def test_parameters_must_lie_in_disk(self):
        with pytest.raises(NotSchurClassError):
            SchurParams((1.2,))
        with pytest.raises(NotSchurClassError):
            SchurParams((0.1,), terminator=0.5)


class TestTaylor:
    def test_constant_function(self):
        c = taylor_coeffs(SchurParams((0.3 + 0.1j,)), 5).coeffs
        assert np.allclose(c, [0.3 + 0.1j, 0, 0, 0, 0, 0])

    @pytest.mark.parametrize("gamma", [np.sqrt(3 / 5), 1 / np.sqrt(2), 0.3j])
    def test_constant_rule_matches_legendre(self, gamma):
        # c_1 = conj(gamma), c_{2n+1} = (P_{n-1}(c) - c P_n(c)) / (2 gamma (n + 1)) give conj of R's coefficients
        c = 1 - 2 * abs(gamma) ** 2
        ref = np.zeros(51, dtype=complex)
        ref[1] = np.conj(gamma)
        for n in range(1, 25):
            ref[2 * n + 1] = (eval_legendre(n - 1, c) - c * eval_legendre(n, c)) / (2 * gamma * (n + 1))
        got = taylor_coeffs(SchurParams.constant_rule(gamma), 50).coeffs
        assert np.abs(np.conj(ref) - got).max() < 1e-10

    def test_identity_function(self):
        p = schur_params_from_taylor(np.array([0, 1, 0, 0], dtype=complex), 5)
        assert p.prefix == (0j,) and p.terminator == 1

    def test_not_schur_class(self):
        with pytest.raises(NotSchurClassError):
            schur_params_from_taylor(np.array([1.5, 0.0]), 3)

    @given(coin_params(1, 30, max_modulus=0.6))
    def test_round_trip(self, gammas):
        back = schur_params_from_taylor(taylor_coeffs(SchurParams(gammas), 40), len(gammas)).prefix
        assert np.abs(np.array(back) - np.array(gammas)).max() < 1e-9

    @given(coin_params(1, 6), disk_point(0.9))
    def test_series_agrees_with_recursion(self, gammas, z):
        p = SchurParams(gammas, (0j, 0.5))
        series = taylor_coeffs(p, 400)
        assert abs(series(z) - eval_schur(p, z)) < 1e-10

    def test_blaschke_product_series(self):
        rng = np.random.default_rng(3)
        zeros = 0.8 * np.sqrt(rng.random(4)) * np.exp(2j * np.pi * rng.random(4))
        f, num, den = blaschke(zeros)
        series = series_div(num, den, 200)
        p = schur_params_from_taylor(series, 10)
        assert p.is_terminated and p.degree == 4
        assert np.abs(np.abs(eval_schur(p, CIRCLE)) - 1).max() < 1e-10
        assert winding_number(lambda z: eval_schur(p, z)).winding == 4
        z = 0.3 - 0.2j
        assert abs(eval_schur(p, z) - f(z)) < 1e-10


class TestIterates:
    def test_iterate_drops_parameters(self):
        p = SchurParams((0.1, 0.2, 0.3), (0j, 0.4))
        assert iterate(p, 2).prefix == (0.3,)
        assert iterate(p, 5).tail == (0j, 0.4)

    def test_iterate_of_constant_rule_is_shift(self):
        p = SchurParams.constant_rule(0.6)
        assert iterate(p, 2).tail == p.tail
        assert iterate(p, 1).tail == (0.6, 0j)

    def test_inverse_iterate(self):
        p = SchurParams((0.1, 0.2j, 0.3))
        q = inverse_iterate(p, 2)
        assert q.prefix == (-0.3, 0.2j, -0.1) and q.terminator == 1
        assert eval_schur(inverse_iterate(p, -1), 0.4) == 1

    def test_half_line_inverse_iterate_degree(self):
        coins = (0.3, 0.5j, -0.4)
        seq = []
        for g in coins:
            seq += [g, 0j]
        q = inverse_iterate(SchurParams(tuple(seq)), 2 * len(coins) - 1)
        assert winding_number(lambda z: eval_schur(q, z)).winding == 2 * len(coins)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            iterate(SchurParams((0.1,), terminator=1), 3)
        with pytest.raises(IndexError):
            inverse_iterate(SchurParams((0.1,), terminator=1), 1)


class TestTransforms:
    def test_trivial_pairs(self):
        assert caratheodory_transforms("f_to_F", 0.0, 0.3) == 1
        z = 0.25 + 0.1j
        assert caratheodory_transforms("F_to_f", (1 + z) / (1 - z), z) == pytest.approx(1)

    def test_matrix_pair_of_the_two_state_model(self):
        rng = np.random.default_rng(7)
        for z in 0.9 * np.sqrt(rng.random(20)) * np.exp(2j * np.pi * rng.random(20)):
            F = np.array([[1 + z ** 2, np.sqrt(2) * z], [np.sqrt(2) * z, 1]]) / (1 - z ** 2)
            f = np.array([[z / 2, 1 / np.sqrt(2)], [1 / np.sqrt(2), 0]])
            assert np.abs(caratheodory_transforms("F_to_f", F, z) - f).max() < 1e-10
            assert np.abs(caratheodory_transforms("f_to_F", f, z) - F).max() < 1e-10

    def test_series_forms(self):
        f = taylor_coeffs(SchurParams((0.2, -0.3j), (0j, 0.5)), 60).coeffs
        F = caratheodory_transforms("f_to_F", f)
        back = caratheodory_transforms("F_to_f", F)
        assert np.abs(back - f[:-1]).max() < 1e-13

    def test_pole(self):
        with pytest.raises(PoleError):
            caratheodory_transforms("F_to_f", -1.0, 0.5)
        with pytest.raises(DomainError):
            caratheodory_transforms("f_to_F", 0.5, 1.0)

    @given(coin_params(1, 6), disk_point(0.95))
    def test_pointwise_round_trip(self, gammas, z):
        if abs(z) < 1e-3:
            z = 0.5
        f = eval_schur(SchurParams(gammas), z)
        F = caratheodory_transforms("f_to_F", f, z)
        assert abs(caratheodory_transforms("F_to_f", F, z) - f) < 1e-10
        assert F.real > -1e-12


class TestOrthogonalPolynomials:
    def test_free_case(self):
        poly = szego_polynomials(SchurParams(), 4)
        assert np.allclose(poly.phi[4], [0, 0, 0, 0, 1])
        assert np.allclose(poly.phi_star[4], [1, 0, 0, 0, 0])
        assert np.allclose(poly.omega[3], [0, 0, 0, 1, 0])

    def test_too_few_parameters(self):
        with pytest.raises(IndexError):
            szego_polynomials(SchurParams((0.1,), terminator=1), 3)

    @given(coin_params(8, 8, 0.8), st.lists(disk_point(0.95), min_size=5, max_size=5))
    def test_identities(self, gammas, zs):
        p = SchurParams(gammas, (0j, 0.4 + 0.1j))
        z = np.array(zs)
        poly = szego_polynomials(p, 7)
        f = eval_schur(p, z)
        F = (1 + z * f) / (1 - z * f)
        for k in range(1, 6):
            inv = eval_schur(inverse_iterate(p, k), z)
            assert np.abs(inv * poly.eval_phi_star(k + 1, z) - poly.eval_phi(k + 1, z)).max() < 1e-9
            fk = eval_schur(iterate(p, k), z)
            lhs = z * fk * (poly.eval_phi(k, z) * F + poly.eval_omega(k, z))
            assert np.abs(lhs - (poly.eval_phi_star(k, z) * F - poly.eval_omega_star(k, z))).max() < 1e-9
            G, Gt = khrushchev_G(p, k, z)
            rho = np.sqrt(1 - abs(p[k]) ** 2)
            lhs = rho * (khrushchev_Fk(p, k, z) - khrushchev_Fk(p, k + 1, z))
            assert np.abs(lhs - (p[k] * G + np.conj(p[k]) * Gt)).max() < 1e-9
            cross = Gt * eval_schur(inverse_iterate(p, k - 1), z) - G * eval_schur(iterate(p, k + 1), z)
            assert np.abs(cross).max() < 1e-9

    def test_iterate_quotient_away_from_origin(self):
        p = SchurParams((0.3, -0.2j, 0.5, 0.1), (0j, 0.4))
        z = 0.6 * np.exp(2j * np.pi * np.arange(8) / 8)
        poly = szego_polynomials(p, 3)
        f = eval_schur(p, z)
        F = (1 + z * f) / (1 - z * f)
        rhs = (poly.eval_phi_star(3, z) * F - poly.eval_omega_star(3, z)) / (
            z * (poly.eval_phi(3, z) * F + poly.eval_omega(3, z)))
        assert np.abs(eval_schur(iterate(p, 3), z) - rhs).max() < 1e-12

    @given(coin_params(1, 6), disk_point(0.9))
    def test_khrushchev_normalisation(self, gammas, z):
        p = SchurParams(gammas)
        for k in range(len(gammas)):
            assert abs(khrushchev_Fk(p, k, 0.0) - 1) < 1e-14
        f = eval_schur(p, z)
        assert abs(khrushchev_Fk(p, 0, z) - (1 + z * f) / (1 - z * f)) < 1e-10

    def test_khrushchev_free_case(self):
        assert khrushchev_Fk(SchurParams(), 0, 0.5) == 1


class TestNormsAndWinding:
    def test_norm_of_identity(self):
        assert l2_norm_sq(PowerSeries(np.array([0, 1.0]))).partial == 1

    def test_constant_coin_norm(self):
        est = l2_norm_sq(taylor_coeffs(SchurParams.constant_rule(1 / np.sqrt(2)), 10000))
        lo, hi = est.interval()
        assert lo <= 2 / np.pi <= hi

    @given(coin_params(1, 6, 0.6))
    def test_inner_functions_have_unit_norm(self, gammas):
        p = SchurParams(gammas, terminator=1.0)
        assert abs(l2_norm_sq(taylor_coeffs(p, 3000)).partial - 1) < 1e-10
        assert np.abs(np.abs(eval_schur(p, CIRCLE)) - 1).max() < 1e-10

    def test_winding_of_z_squared(self):
        res = winding_number(lambda z: z ** 2, M=64)
        assert res.winding == 2 and res.residue < 1e-12

    def test_winding_undefined(self):
        with pytest.raises(WindingUndefinedError):
            winding_number(lambda z: z - 1)

    @given(st.integers(1, 5), st.integers(0, 2 ** 31))
    def test_winding_equals_blaschke_degree(self, d, seed):
        rng = np.random.default_rng(seed)
        zeros = 0.9 * np.sqrt(rng.random(d)) * np.exp(2j * np.pi * rng.random(d))
        f, _, _ = blaschke(zeros)
        assert winding_number(f).winding == d

    def test_tau_r(self):
        assert tau_r(PowerSeries(np.array([0, 1.0])), 0.9) == pytest.approx(0.81)
        rng = np.random.default_rng(5)
        zeros = 0.6 * np.sqrt(rng.random(3)) * np.exp(2j * np.pi * rng.random(3))
        _, num, den = blaschke(zeros)
        series = PowerSeries(series_div(num, den, 4000))
        assert abs(tau_r(series, 1 - 2.0 ** -12) - 3) < 1e-2
        c = taylor_coeffs(SchurParams.constant_rule(0.6), 4000)
        assert tau_r(c, 0.999) > tau_r(c, 0.99) > tau_r(c, 0.9)


@given(coin_params(1, 8), coin_params(1, 8))
def test_series_mul_div_inverse(a, b):
    a = np.array(a)
    b = np.concatenate([[1.0], np.array(b)])
    n = 12
    q = series_div(a, b, n)
    assert np.abs(series_mul(q, b, n)[: len(a)] - a).max() < 1e-12
