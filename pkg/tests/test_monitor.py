import json

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from qrecur.errors import DomainError, TruncatedModelError
from qrecur.linops import (
    CoinSpec1D,
    Subspace,
    basis_state,
    build_coined_1d,
    build_cyclic_shift,
    build_from_matrix,
    build_shift_plus_flip,
    random_unitary,
)
from qrecur.monitor import (
    AmplitudeSequence,
    BoundaryFunction,
    MatrixSeries,
    berry_phase_loop,
    caratheodory_of_subspace,
    expected_return_time,
    first_return_direct,
    first_return_until_decay,
    k_dim_minus_nu,
    k_invariant,
    matrix_schur_from_amplitudes,
    mu_sequence,
    recurrence_report,
    renewal_a_to_mu,
    renewal_mu_to_a,
    return_probability_operator,
    scalar_first_return,
    spectral_decompose,
    state_return_probability,
    stieltjes_of_subspace,
    subspace_spectral_measure,
    survival,
    tau_operator,
    to_jsonable,
    transition_probability,
)
from strategies import seeds

K_METHODS = ("eigen_ranks", "frobenius_survival", "winding")


def random_model(seed, n, d):
    rng = np.random.default_rng(seed)
    U = build_from_matrix(random_unitary(n, rng))
    V = Subspace.from_labels(U.space, list(range(d)))
    return U, V, rng


def unit(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


class TestCyclicShift:
    """Three-state cyclic shift monitored on span{|0>, |1>}."""

    @pytest.fixture(scope="class")
    @staticmethod
    def model():
        U = build_cyclic_shift(3)
        V = Subspace.from_labels(U.space, [0, 1])
        return U, V, first_return_until_decay(U, V)

    def test_amplitudes_by_hand(self, model):
        # |0> -> |1> in one step; |1> -> |2> -> |0> in two
        a = model[2].mats
        assert np.array_equal(a[1], [[0, 0], [1, 0]])
        assert np.array_equal(a[2], [[0, 1], [0, 0]])
        assert len(a) == 3

    def test_tau_and_k(self, model):
        U, V, a = model
        rep = recurrence_report(a)
        assert np.abs(rep.tau_op - np.diag([1.0, 2.0])).max() < 1e-10
        assert rep.avg_tau == 1.5 and rep.K == 3
        assert rep.classification == "recurrent_finite_tau"
        for m in K_METHODS:
            assert k_invariant(m, U, V, a=a).value == 3
        assert k_invariant("winding", a=a).residue < 1e-6
        assert k_dim_minus_nu(spectral_decompose(U), V) == 3

    def test_berry_phase_equals_return_time(self, model):
        a = model[2]
        assert abs(berry_phase_loop(a, np.array([0.0, 1.0])) - 2) < 1e-6
        psi = np.array([1.0, 1.0j]) / np.sqrt(2)
        assert abs(berry_phase_loop(a, psi) - 1.5) < 1e-6

    def test_berry_phase_from_circle_values(self, model):
        series = MatrixSeries(model[2].mats)
        exact = BoundaryFunction(series, 2)
        psi = np.array([0.6, 0.8j])
        assert abs(berry_phase_loop(exact, psi) - berry_phase_loop(series, psi)) < 1e-12


class TestShiftPlusFlip:
    @pytest.fixture(scope="class")
    @staticmethod
    def model():
        U, psi, phi = build_shift_plus_flip(40)
        V = Subspace.from_vectors(U.space, [psi, phi])
        mu = mu_sequence(U, V, 40)
        return U, V, psi, phi, mu, renewal_mu_to_a(mu)

    def test_first_return_amplitudes(self, model):
        a = model[5].mats
        s = 1 / np.sqrt(2)
        assert np.abs(a[1] - [[0, s], [s, 0]]).max() < 1e-15
        assert np.abs(a[2] - [[0.5, 0], [0, 0]]).max() < 1e-15
        assert np.abs(a[3:]).max() < 1e-15

    def test_return_probabilities(self, model):
        U, V, psi, phi, mu, a = model
        R = return_probability_operator(a)
        assert np.abs(R.partial - np.diag([0.75, 0.5])).max() < 1e-10
        assert abs(state_return_probability(a, psi, V).partial - 0.75) < 1e-12
        assert abs(transition_probability(a, psi, phi, V).partial - 0.5) < 1e-12

    def test_direct_route_agrees(self, model):
        U, V, *_, a = model
        assert np.abs(first_return_direct(U, V, 40).mats - a.mats).max() < 1e-14

    def test_not_recurrent(self, model):
        rep = recurrence_report(model[5])
        assert rep.classification == "not_recurrent" and rep.tau_divergent
        assert expected_return_time(model[5], np.array([0.0, 1.0])).divergent


class TestFiniteModels:
    @given(seeds, st.integers(2, 9), st.integers(1, 3))
    def test_renewal_round_trip(self, seed, n, d):
        U, V, _ = random_model(seed, n, min(d, n - 1))
        mu = mu_sequence(U, V, 30)
        a = renewal_mu_to_a(mu)
        assert np.abs(renewal_a_to_mu(a).mats - mu.mats).max() < 1e-11
        assert np.abs(first_return_direct(U, V, 30).mats - a.mats).max() < 1e-11

    @given(seeds, st.integers(2, 9), st.integers(1, 3))
    def test_survival_identity(self, seed, n, d):
        U, V, rng = random_model(seed, n, min(d, n - 1))
        a = first_return_direct(U, V, 40)
        c = unit(rng, V.dim_v)
        res = survival(U, V, V.embed(c), 40)
        drops = res.s[:-1] - res.s[1:]
        amps = np.linalg.norm(a.mats[1:] @ c, axis=1) ** 2
        assert np.abs(drops - amps).max() < 1e-12
        assert np.all(drops > -1e-14)

    @given(seeds, st.integers(2, 9), st.integers(1, 3))
    def test_return_operator_bounds(self, seed, n, d):
        U, V, _ = random_model(seed, n, min(d, n - 1))
        R = return_probability_operator(first_return_direct(U, V, 25)).partial
        ev = np.linalg.eigvalsh(R)
        assert ev.min() > -1e-10 and ev.max() < 1 + 1e-10

    @given(seeds, st.integers(3, 8), st.integers(1, 2))
    def test_recurrence_and_k(self, seed, n, d):
        U, V, rng = random_model(seed, n, d)
        # nearly reducible models need ~1e6 steps for the surviving part to decay
        survive = U.dense() - V.frame @ (V.frame.conj().T @ U.dense())
        assume(np.abs(np.linalg.eigvals(survive)).max() < 0.999)
        a = first_return_until_decay(U, V)
        rep = recurrence_report(a)
        assert rep.classification == "recurrent_finite_tau"
        # a generic subspace is cyclic for the whole space
        ks = {k_invariant(m, U, V, a=a).value for m in K_METHODS}
        assert ks == {n} and rep.K == n
        assert abs(rep.avg_tau - n / d) < 1e-8
        psi = unit(rng, d)
        tau = expected_return_time(a, psi)
        assert abs(berry_phase_loop(a, psi) - tau.value) < 1e-6

    def test_invariant_subspace_reduces_k(self):
        # block-diagonal unitary: V meets only one block of size 3
        rng = np.random.default_rng(11)
        m = np.zeros((5, 5), dtype=complex)
        m[:3, :3] = random_unitary(3, rng)
        m[3:, 3:] = random_unitary(2, rng)
        U = build_from_matrix(m)
        V = Subspace.from_labels(U.space, [0])
        ks = {k_invariant(k, U, V).value for k in K_METHODS}
        assert ks == {3} and k_dim_minus_nu(spectral_decompose(U), V) == 3

    @given(seeds, st.integers(2, 7))
    def test_spectral_transforms(self, seed, n):
        U, V, rng = random_model(seed, n, 1 if n == 2 else 2)
        masses = subspace_spectral_measure(spectral_decompose(U), V)
        mu = mu_sequence(U, V, 200)
        z = 0.6 * unit(rng, 1)[0]
        series = np.einsum("n,nij->ij", z ** np.arange(201), mu.mats)
        assert np.abs(stieltjes_of_subspace(masses, z) - series).max() < 1e-12
        f = matrix_schur_from_amplitudes(first_return_until_decay(U, V))
        assert np.abs(caratheodory_of_subspace(masses, z) - caratheodory_of_subspace(f, z)).max() < 1e-10
        assert np.abs(np.linalg.norm(f(z), 2)) <= 1 + 1e-10

    def test_spectral_data_of_truncations_is_refused(self):
        U = build_coined_1d(CoinSpec1D.constant("line", 0.5), 4, sites=[0])
        with pytest.raises(TruncatedModelError):
            spectral_decompose(U)
        V = Subspace.from_labels(U.space, [(0, "up")])
        with pytest.raises(TruncatedModelError):
            first_return_until_decay(U, V)


class TestScalarAndTau:
    def test_scalar_first_return_matches_matrix_route(self):
        U, V, _ = random_model(2, 6, 1)
        mu = mu_sequence(U, V, 50)
        a = first_return_direct(U, V, 50)
        assert np.abs(scalar_first_return(mu.mats[:, 0, 0]) - a.mats[:, 0, 0]).max() < 1e-12

    def test_scalar_first_return_needs_unit_start(self):
        with pytest.raises(ValueError):
            scalar_first_return(np.array([2.0, 0.0]))

    def test_tau_operator_diverges_on_constant_line(self):
        U = build_coined_1d(CoinSpec1D.constant("line", 1 / np.sqrt(2)), 200, sites=[0])
        V = Subspace.from_labels(U.space, [(0, "up"), (0, "down")])
        a = renewal_mu_to_a(mu_sequence(U, V, 200))
        op, avg = tau_operator(a)
        assert op is None and avg == np.inf

    def test_state_outside_subspace(self):
        U, V, _ = random_model(0, 4, 2)
        a = first_return_direct(U, V, 5)
        with pytest.raises(DomainError):
            state_return_probability(a, basis_state(U.space, 3), V)
        with pytest.raises(DomainError):
            state_return_probability(a, np.ones(3))

    def test_kind_checks(self):
        mu = AmplitudeSequence("mu", np.eye(1)[None].repeat(3, axis=0))
        with pytest.raises(ValueError):
            renewal_a_to_mu(mu)
        with pytest.raises(ValueError):
            return_probability_operator(mu)


def test_report_json_is_plain():
    U = build_cyclic_shift(3)
    V = Subspace.from_labels(U.space, [0, 1])
    a = first_return_until_decay(U, V)
    d = json.loads(recurrence_report(a).to_json(sort_keys=True))
    assert d["schema_version"] == "1.0"
    assert d["tau_op"][1][1] == [2.0, 0.0]
    assert to_jsonable([np.inf, 1 + 2j]) == ["inf", [1.0, 2.0]]
