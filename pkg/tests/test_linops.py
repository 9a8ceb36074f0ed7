import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrecur.errors import (
    DomainError,
    HorizonExceededError,
    InvalidCoinError,
    InvalidDimensionError,
    TruncationTooSmallError,
)
from qrecur.linops import (
    C0_3,
    GROVER_4,
    HEXAGONAL_SHIFTS,
    CoinSpec1D,
    CoinSpec2D,
    StateSpace,
    Subspace,
    UnitaryStep,
    apply_power,
    basis_state,
    build_coined_1d,
    build_coined_2d,
    build_cyclic_shift,
    build_from_matrix,
    build_shift_plus_flip,
    coin_matrix_1d,
    random_unitary,
)
from qrecur.monitor import mu_sequence
from strategies import coin_params, seeds


def _cmv(params, n):
    """CMV matrix M L built from 2x2 blocks [[conj g, rho], [rho, -g]]."""
    def theta(g):
        r = np.sqrt(1 - abs(g) ** 2)
        return np.array([[np.conj(g), r], [r, -g]])

    L = np.zeros((n, n), dtype=complex)
    M = np.zeros((n, n), dtype=complex)
    M[0, 0] = 1.0
    for k in range(0, n - 1, 2):
        L[k:k + 2, k:k + 2] = theta(params[k])
    for k in range(1, n - 1, 2):
        M[k:k + 2, k:k + 2] = theta(params[k])
    return M @ L


class TestStateSpace:
    def test_index_and_unknown_label(self):
        s = StateSpace(("a", "b"))
        assert s.dim == 2 and s.index("b") == 1
        with pytest.raises(DomainError):
            s.index("c")

    def test_rejects_duplicates_and_empty(self):
        with pytest.raises(ValueError):
            StateSpace(("a", "a"))
        with pytest.raises(InvalidDimensionError):
            StateSpace(())


class TestBuilders:
    def test_cyclic_shift_moves_basis_states(self):
        U = build_cyclic_shift(3)
        e0 = basis_state(U.space, 0)
        assert np.allclose(apply_power(U, e0, 2), basis_state(U.space, 2))
        assert np.allclose(apply_power(U, e0, 3), e0)

    def test_from_matrix_rejects_non_unitary(self):
        with pytest.raises(ValueError):
            build_from_matrix(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_shift_plus_flip_states(self):
        U, psi, phi = build_shift_plus_flip(10)
        assert abs(np.vdot(psi, phi)) < 1e-15
        assert np.isclose(np.linalg.norm(phi), 1.0)
        with pytest.raises(TruncationTooSmallError):
            build_shift_plus_flip(1)

    def test_horizon_is_enforced(self):
        U, psi, phi = build_shift_plus_flip(6)
        V = Subspace.from_vectors(U.space, [psi, phi])
        mu_sequence(U, V, 6)
        with pytest.raises(HorizonExceededError):
            mu_sequence(U, V, 7)

    def test_untrusted_support_is_refused(self):
        U = build_coined_1d(CoinSpec1D.constant("line", 0.5), 5, sites=[0])
        with pytest.raises(DomainError):
            U.check_support(basis_state(U.space, (7, "up")))

    def test_half_line_matches_cmv_pattern(self):
        rng = np.random.default_rng(4)
        g = tuple(0.8 * rng.random(6) * np.exp(2j * np.pi * rng.random(6)))
        spec = CoinSpec1D("half_line", g, default=0.3 + 0.1j)
        U = build_coined_1d(spec, 5, sites=[0]).dense()
        n = U.shape[0]
        params = []
        for x in range(n // 2):
            params += [spec.gamma(x), 0j]
        # compare away from the artificial reflecting end of the truncation
        m = n - 4
        assert np.array_equal(_cmv(params, n)[:m, :m], U[:m, :m])

    def test_coin_validation(self):
        with pytest.raises(InvalidCoinError):
            CoinSpec1D("half_line", (1.0,))
        with pytest.raises(InvalidCoinError):
            CoinSpec2D("square", np.eye(3))
        with pytest.raises(InvalidCoinError):
            CoinSpec2D("square", 2 * np.eye(4))
        with pytest.raises(InvalidCoinError):
            CoinSpec2D.named("square", "c0")
        with pytest.raises(InvalidCoinError):
            CoinSpec2D("hexagonal", C0_3, ((1, 0), (0, 1), (1, 1)))

    def test_storage_switches_to_sparse(self):
        U = build_coined_2d(CoinSpec2D("square", GROVER_4), 20)
        assert U.is_sparse
        assert not build_cyclic_shift(5).is_sparse

    def test_two_step_square_grover_by_path_enumeration(self):
        spec = CoinSpec2D("square", GROVER_4)
        U = build_coined_2d(spec, 3)
        V = Subspace.from_labels(U.space, [(0, 0, j) for j in range(4)])
        mu = mu_sequence(U, V, 2).mats
        # out along direction j, back along the opposite direction j'
        expected = np.zeros((4, 4), dtype=complex)
        for k in range(4):
            for j, s in enumerate(spec.shifts):
                for jj, t in enumerate(spec.shifts):
                    if s[0] + t[0] == 0 and s[1] + t[1] == 0:
                        expected[jj, k] += GROVER_4[jj, j] * GROVER_4[j, k]
        assert np.allclose(mu[1], 0.0)
        assert np.abs(mu[2] - expected).max() < 1e-15


class TestProperties:
    @given(coin_params(1, 6), st.integers(1, 8))
    def test_finite_lattice_is_unitary(self, gammas, horizon):
        U = build_coined_1d(CoinSpec1D("finite", gammas), horizon).dense()
        assert np.abs(U.conj().T @ U - np.eye(U.shape[0])).max() < 1e-12

    @given(seeds, st.integers(1, 12))
    def test_random_unitary_is_unitary(self, seed, n):
        m = random_unitary(n, np.random.default_rng(seed))
        assert np.abs(m.conj().T @ m - np.eye(n)).max() < 1e-12

    @given(coin_params(1, 5), st.integers(-3, 3), st.integers(4, 16))
    def test_truncation_doubling_line(self, gammas, x, h):
        spec = CoinSpec1D("line", gammas, offset=-2, default=0.35 - 0.2j)
        mus = []
        for horizon in (h, 2 * h):
            U = build_coined_1d(spec, horizon, sites=[x])
            V = Subspace.from_labels(U.space, [(x, "up"), (x, "down")])
            mus.append(mu_sequence(U, V, h).mats)
        assert np.abs(mus[0] - mus[1]).max() < 1e-14

    @given(st.sampled_from(["grover", "fourier"]), st.integers(2, 8))
    def test_truncation_doubling_square(self, coin, h):
        spec = CoinSpec2D.named("square", coin)
        mus = []
        for horizon in (h, 2 * h):
            U = build_coined_2d(spec, horizon)
            V = Subspace.from_labels(U.space, [(0, 0, j) for j in range(4)])
            mus.append(mu_sequence(U, V, h).mats)
        assert np.abs(mus[0] - mus[1]).max() < 1e-14

    @given(coin_params(1, 1))
    def test_coin_matrix_is_unitary(self, g):
        c = coin_matrix_1d(g[0])
        assert np.abs(c.conj().T @ c - np.eye(2)).max() < 1e-14

    def test_hexagonal_shifts_sum_to_zero(self):
        assert tuple(map(sum, zip(*HEXAGONAL_SHIFTS))) == (0, 0)


def test_subspace_coords_refuse_outside_states():
    s = StateSpace((0, 1, 2))
    V = Subspace.from_labels(s, [0, 1])
    with pytest.raises(DomainError):
        V.coords(np.array([0, 0, 1.0]))
    with pytest.raises(DomainError):
        Subspace(s, np.array([[1, 1], [0, 0], [0, 0]], dtype=float))


def test_unitary_step_shape_check():
    with pytest.raises(InvalidDimensionError):
        UnitaryStep(StateSpace((0, 1)), np.eye(3))
