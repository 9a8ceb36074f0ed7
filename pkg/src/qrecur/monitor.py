"""Monitored recurrence of a subspace V under a unitary step U.

With ``P`` the projector onto V and ``Ut = (I - P) U``:

* ``mu_n = P U^n P``          return amplitudes (no monitoring),
* ``a_n = P U Ut^{n-1} P``     first-return amplitudes,
* ``s_n = ||Ut^n psi||^2``     survival probabilities,
* ``R = sum_n a_n^dag a_n``    return-probability operator,
* ``tau = sum_n n a_n^dag a_n`` expected-return-time operator.

All matrices on V are written in the frame of the Subspace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import (
    DomainError,
    InvalidDimensionError,
    NotRationalInnerError,
    PoleError,
    TruncatedModelError,
)
from .linops import Subspace, UnitaryStep
from .schur import series_div, winding_number
from .tails import SeriesEstimate, TailFit, estimate_sum

__all__ = [
    "SCHEMA_VERSION",
    "AmplitudeSequence",
    "BoundaryFunction",
    "MatrixSeries",
    "SpectralDecomposition",
    "SpectralMass",
    "OperatorEstimate",
    "SurvivalResult",
    "TauEstimate",
    "KResult",
    "RecurrenceReport",
    "mu_sequence",
    "first_return_direct",
    "first_return_until_decay",
    "renewal_mu_to_a",
    "renewal_a_to_mu",
    "scalar_first_return",
    "survival",
    "return_probability_operator",
    "state_return_probability",
    "transition_probability",
    "expected_return_time",
    "tau_operator",
    "spectral_decompose",
    "subspace_spectral_measure",
    "k_invariant",
    "k_dim_minus_nu",
    "matrix_schur_from_amplitudes",
    "caratheodory_of_subspace",
    "stieltjes_of_subspace",
    "berry_phase_loop",
    "recurrence_report",
    "to_jsonable",
]

SCHEMA_VERSION = "1.0"
CLUSTER_TOL = 1e-9
RANK_TOL = 1e-9
RESIDUE_TOL = 1e-6
INNER_TOL = 1e-8
EXACT_REMAINDER = 1e-28


@dataclass(frozen=True, eq=False)
class AmplitudeSequence:
    """Sequence of ``dim_v x dim_v`` matrices ``mu_n`` or ``a_n`` for n = 0..horizon.

    For ``kind == "a"`` the entry at n = 0 is zero (there is no 0-step return).
    ``remainder``, when known, bounds ``sum_{n > horizon} ||a_n||_F^2`` (the
    Frobenius mass still surviving at the horizon).
    """

    kind: str
    mats: np.ndarray
    remainder: float | None = None
    horizon: int = field(init=False)

    def __post_init__(self):
        if self.kind not in ("mu", "a"):
            raise ValueError("kind must be 'mu' or 'a'")
        m = np.asarray(self.mats, dtype=complex)
        if m.ndim != 3 or m.shape[1] != m.shape[2] or m.shape[0] < 1:
            raise InvalidDimensionError("mats must have shape (horizon + 1, d, d)")
        object.__setattr__(self, "mats", m)
        object.__setattr__(self, "horizon", m.shape[0] - 1)
        d = m.shape[1]
        if self.kind == "mu" and np.abs(m[0] - np.eye(d)).max() > 1e-14:
            raise ValueError("mu_0 must be the identity")
        if self.kind == "a" and np.abs(m[0]).max() > 0:
            raise ValueError("a_0 must vanish")

    @property
    def subspace_dim(self) -> int:
        return self.mats.shape[1]

    def __getitem__(self, n: int) -> np.ndarray:
        return self.mats[n]

    def truncate(self, horizon: int) -> "AmplitudeSequence":
        return AmplitudeSequence(self.kind, self.mats[: horizon + 1])

    @property
    def terminated(self) -> bool:
        """True when nothing survives past the horizon (to working precision)."""
        return self.remainder is not None and self.remainder <= EXACT_REMAINDER

    def restrict(self, frame: np.ndarray) -> "AmplitudeSequence":
        """Amplitudes of a subspace W of V given by an orthonormal frame in V-coordinates.

        Only valid for ``kind == "mu"``: ``P_W U^n P_W = W^dag (P U^n P) W``.
        First-return amplitudes of W must be recomputed by renewal.
        """
        if self.kind != "mu":
            raise ValueError("only return amplitudes restrict to a smaller subspace")
        w = np.asarray(frame, dtype=complex)
        if w.ndim == 1:
            w = w[:, None]
        if np.abs(w.conj().T @ w - np.eye(w.shape[1])).max() > 1e-12:
            raise DomainError("frame vectors are not orthonormal")
        return AmplitudeSequence("mu", w.conj().T @ self.mats @ w)

    def operator_norms(self) -> np.ndarray:
        return np.linalg.norm(self.mats, ord=2, axis=(1, 2))


def _frame_for(U: UnitaryStep, V: Subspace) -> np.ndarray:
    if V.space.dim != U.dim:
        raise InvalidDimensionError("subspace and step live in different spaces")
    U.check_support(V.frame)
    return V.frame


def mu_sequence(U: UnitaryStep, V: Subspace, n_max: int) -> AmplitudeSequence:
    """``mu_n = P U^n P`` for n = 0..n_max by repeated application to the frame."""
    U.check_horizon(n_max)
    frame = _frame_for(U, V)
    fh = frame.conj().T
    mats = np.zeros((n_max + 1, V.dim_v, V.dim_v), dtype=complex)
    mats[0] = np.eye(V.dim_v)
    x = frame
    for n in range(1, n_max + 1):
        x = U.matrix @ x
        mats[n] = fh @ x
    return AmplitudeSequence("mu", mats)


def first_return_direct(U: UnitaryStep, V: Subspace, n_max: int) -> AmplitudeSequence:
    """``a_n = P U Ut^{n-1} P`` by iterating ``Ut = (I - P) U`` on the frame."""
    U.check_horizon(n_max)
    frame = _frame_for(U, V)
    fh = frame.conj().T
    mats = np.zeros((n_max + 1, V.dim_v, V.dim_v), dtype=complex)
    x = frame
    for n in range(1, n_max + 1):
        y = U.matrix @ x
        mats[n] = fh @ y
        x = y - frame @ mats[n]
    return AmplitudeSequence("a", mats, float(np.vdot(x, x).real))


def first_return_until_decay(
    U: UnitaryStep, V: Subspace, tol: float = 1e-32, n_cap: int = 200_000
) -> AmplitudeSequence:
    """First-return amplitudes of a finite model, run until ``||Ut^n P||_F^2 < tol``.

    On a finite space the surviving part decays exponentially (the restriction
    of ``Ut`` to the cyclic space of V has spectrum inside the disk).
    """
    if U.truncated:
        raise TruncatedModelError("decay to zero is only guaranteed for finite models")
    frame = _frame_for(U, V)
    fh = frame.conj().T
    mats = [np.zeros((V.dim_v, V.dim_v), dtype=complex)]
    x = frame
    for _ in range(n_cap):
        y = U.matrix @ x
        a = fh @ y
        mats.append(a)
        x = y - frame @ a
        rem = float(np.vdot(x, x).real)
        if rem < tol:
            return AmplitudeSequence("a", np.array(mats), rem)
    raise NotRationalInnerError(f"surviving amplitude did not decay within {n_cap} steps")


def renewal_mu_to_a(mu: AmplitudeSequence) -> AmplitudeSequence:
    """Solve ``mu_n = a_n + sum_{k=1}^{n-1} mu_k a_{n-k}`` for the ``a_n``."""
    if mu.kind != "mu":
        raise ValueError("expected return amplitudes")
    m = mu.mats
    a = np.zeros_like(m)
    for n in range(1, len(m)):
        if n == 1:
            a[1] = m[1]
        else:
            a[n] = m[n] - np.matmul(m[1:n], a[n - 1 : 0 : -1]).sum(axis=0)
    return AmplitudeSequence("a", a)


def renewal_a_to_mu(a: AmplitudeSequence) -> AmplitudeSequence:
    """``mu_0 = I`` and ``mu_n = a_n + sum_{k=1}^{n-1} mu_k a_{n-k}``."""
    if a.kind != "a":
        raise ValueError("expected first-return amplitudes")
    am = a.mats
    m = np.zeros_like(am)
    m[0] = np.eye(am.shape[1])
    for n in range(1, len(am)):
        m[n] = am[n]
        if n > 1:
            m[n] = m[n] + np.matmul(m[1:n], am[n - 1 : 0 : -1]).sum(axis=0)
    return AmplitudeSequence("mu", m)


def scalar_first_return(mu: np.ndarray) -> np.ndarray:
    """First-return amplitudes of a single state from its return amplitudes.

    Scalar renewal ``a_hat = 1 - 1 / mu_hat`` as one series division.
    """
    m = np.asarray(mu, dtype=complex)
    if abs(m[0] - 1.0) > 1e-14:
        raise ValueError("mu_0 must be 1")
    a = -series_div(np.array([1.0 + 0j]), m, len(m) - 1)
    a[0] += 1.0
    a[0] = 0.0
    return a


@dataclass(frozen=True, eq=False)
class SurvivalResult:
    """Survival probabilities ``s_0..s_N`` and derived estimates.

    ``return_estimate = 1 - s_N`` is the probability of having returned by step N;
    ``tau_partial[n] = s_0 + ... + s_n``.
    """

    s: np.ndarray
    return_estimate: float
    tau_partial: np.ndarray


def survival(U: UnitaryStep, V: Subspace, psi: np.ndarray, n_max: int) -> SurvivalResult:
    U.check_horizon(n_max)
    frame = _frame_for(U, V)
    V.coords(psi)
    x = np.asarray(psi, dtype=complex)
    U.check_support(x)
    s = np.empty(n_max + 1)
    s[0] = np.vdot(x, x).real
    proj = frame @ frame.conj().T if frame.shape[0] < 4096 else None
    for n in range(1, n_max + 1):
        y = U.matrix @ x
        x = y - (proj @ y if proj is not None else frame @ (frame.conj().T @ y))
        s[n] = np.vdot(x, x).real
    return SurvivalResult(s, float(1.0 - s[-1]), np.cumsum(s))


def _coords(psi, d: int, V: Subspace | None) -> np.ndarray:
    if V is not None and np.shape(psi)[0] == V.space.dim and V.space.dim != d:
        return V.coords(psi)
    v = np.asarray(psi, dtype=complex)
    if v.shape != (d,):
        raise DomainError("state does not lie in the subspace")
    return v


@dataclass(frozen=True, eq=False)
class OperatorEstimate:
    """Hermitian partial sum with a scalar bound on the missing tail.

    Eigenvalues of the full sum lie in ``[eig, eig + tail_bound]`` (Weyl).
    """

    partial: np.ndarray
    tail_estimate: float
    tail_bound: float
    fit: TailFit | None
    horizon: int

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.partial)[::-1]

    def eigen_intervals(self, cap: float | None = None) -> np.ndarray:
        ev = self.eigenvalues
        hi = ev + self.tail_bound
        if cap is not None:
            hi = np.minimum(hi, cap)
        return np.column_stack([ev, hi])

    def extrapolated(self, last_terms: np.ndarray | None = None) -> np.ndarray:
        """Partial sum plus the fitted tail distributed like the last terms."""
        if last_terms is None or not np.isfinite(self.tail_estimate) or self.tail_estimate == 0:
            return self.partial
        shape = last_terms / max(np.trace(last_terms).real, 1e-300)
        return self.partial + self.tail_estimate * shape


def _herm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def return_probability_operator(a: AmplitudeSequence, tail: str = "powerlaw") -> OperatorEstimate:
    """``R = sum_n a_n^dag a_n`` with a power-law tail bound on ``||a_n||_F^2``."""
    if a.kind != "a":
        raise ValueError("expected first-return amplitudes")
    am = a.mats
    terms = np.matmul(am.conj().transpose(0, 2, 1), am)
    R = _herm(terms.sum(axis=0))
    fro = np.einsum("nij,nij->n", am.conj(), am).real
    est = _estimate(a, fro, tail)
    return OperatorEstimate(R, est.tail_estimate, est.tail_bound, est.fit, a.horizon)


def _estimate(a: AmplitudeSequence, terms: np.ndarray, tail: str, weighted: bool = False) -> SeriesEstimate:
    """Sum ``terms[1:]`` with the tail interval, using the surviving mass when known."""
    if a.terminated:
        return SeriesEstimate(float(np.sum(terms[1:])), 0.0, 0.0, None, a.horizon)
    est = estimate_sum(terms[1:], start=1, tail=tail)
    if a.remainder is not None and not weighted and a.remainder < est.tail_bound:
        est = SeriesEstimate(est.partial, min(est.tail_estimate, a.remainder), a.remainder, est.fit, est.horizon)
    return est


def _vector_terms(a: AmplitudeSequence, v: np.ndarray) -> np.ndarray:
    w = a.mats @ v
    return np.einsum("ni,ni->n", w.conj(), w).real


def state_return_probability(a: AmplitudeSequence, psi, V: Subspace | None = None, tail: str = "powerlaw") -> SeriesEstimate:
    """``R(psi) = sum_n ||a_n psi||^2``."""
    v = _coords(psi, a.subspace_dim, V)
    return _estimate(a, _vector_terms(a, v), tail)


def transition_probability(a: AmplitudeSequence, psi, phi, V: Subspace | None = None, tail: str = "powerlaw") -> SeriesEstimate:
    """``Prob(psi, phi) = sum_n |<phi| a_n psi>|^2``."""
    v = _coords(psi, a.subspace_dim, V)
    w = _coords(phi, a.subspace_dim, V)
    amp = np.einsum("i,nij,j->n", w.conj(), a.mats, v)
    return _estimate(a, np.abs(amp) ** 2, tail)


@dataclass(frozen=True)
class TauEstimate:
    """Expected return time of a state.

    ``value`` is ``inf`` when divergent.  ``mass_deficit`` is
    ``1 - sum ||a_n psi||^2`` at the horizon, ``return_probability`` the
    corresponding estimate with its interval.
    """

    value: float
    divergent: bool
    mass_deficit: float
    partial: SeriesEstimate
    return_probability: SeriesEstimate

    @property
    def interval(self) -> tuple[float, float]:
        if self.divergent:
            return (float(self.partial.partial), np.inf)
        return self.partial.interval()


def expected_return_time(
    a: AmplitudeSequence, psi, recurrence_tol: float = 1e-6, V: Subspace | None = None, tail: str = "powerlaw"
) -> TauEstimate:
    """``tau(psi) = sum_n n ||a_n psi||^2``, or divergent.

    A state whose return probability stays below ``1 - recurrence_tol`` even
    after adding the tail bound is not recurrent and has infinite expected
    return time; so is a recurrent state whose ``n ||a_n psi||^2`` tail does
    not decay faster than ``1/n``.
    """
    v = _coords(psi, a.subspace_dim, V)
    terms = _vector_terms(a, v)
    n = np.arange(len(terms))
    rp = _estimate(a, terms, tail)
    deficit = 1.0 - rp.partial
    tau = _estimate(a, n * terms, tail, weighted=True)
    divergent = (deficit - rp.tail_bound > recurrence_tol) or not np.isfinite(tau.tail_bound)
    value = np.inf if divergent else float(tau.partial)
    return TauEstimate(value, bool(divergent), float(deficit), tau, rp)


def tau_operator(a: AmplitudeSequence, tail: str = "powerlaw", recurrence_tol: float = 1e-6):
    """``tau = sum_n n a_n^dag a_n`` or ``None`` when the series diverges.

    Returns
    -------
    (OperatorEstimate or None, float)
        The operator (with tail bound) and the averaged value ``Tr(tau)/dim V``
        (``inf`` when divergent).
    """
    if a.kind != "a":
        raise ValueError("expected first-return amplitudes")
    am = a.mats
    d = a.subspace_dim
    fro = np.einsum("nij,nij->n", am.conj(), am).real
    n = np.arange(len(fro))
    rsum = _estimate(a, fro, tail)
    deficit = d - rsum.partial
    weighted = _estimate(a, n * fro, tail, weighted=True)
    if deficit - rsum.tail_bound > recurrence_tol * d or not np.isfinite(weighted.tail_bound):
        return None, np.inf
    terms = np.matmul(am.conj().transpose(0, 2, 1), am)
    T = _herm(np.tensordot(np.arange(len(am)), terms, axes=(0, 0)))
    op = OperatorEstimate(T, weighted.tail_estimate, weighted.tail_bound, weighted.fit, a.horizon)
    return op, float(np.trace(T).real / d)


# --- spectral data of finite models ----------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Distinct eigenvalues of a finite unitary with orthonormal eigenspace bases."""

    eigenvalues: np.ndarray
    bases: tuple

    @property
    def multiplicities(self) -> list[int]:
        return [b.shape[1] for b in self.bases]

    @property
    def projectors(self) -> list[np.ndarray]:
        return [b @ b.conj().T for b in self.bases]

    @property
    def dim(self) -> int:
        return self.bases[0].shape[0]


@dataclass(frozen=True, eq=False)
class SpectralMass:
    eigenvalue: complex
    mass: np.ndarray
    rank: int


def spectral_decompose(U: UnitaryStep, tol: float = CLUSTER_TOL) -> SpectralDecomposition:
    """Complex Schur form of a finite unitary, eigenvalues clustered at ``tol``."""
    if U.truncated:
        raise TruncatedModelError("spectral data of a truncated infinite model is not meaningful")
    T, Z = sla.schur(U.dense(), output="complex")
    lam = np.diag(T).copy()
    order = np.argsort(np.angle(lam))
    lam, Z = lam[order], Z[:, order]
    groups = [[0]]
    for i in range(1, len(lam)):
        if abs(lam[i] - lam[groups[-1][-1]]) < tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    if len(groups) > 1 and abs(lam[groups[0][0]] - lam[groups[-1][-1]]) < tol:
        groups[0] = groups.pop() + groups[0]
    vals, bases = [], []
    for g in groups:
        v = np.mean(lam[g])
        vals.append(v / abs(v))
        bases.append(Z[:, g])
    return SpectralDecomposition(np.array(vals), tuple(bases))


def subspace_spectral_measure(dec: SpectralDecomposition, V: Subspace, tol: float = RANK_TOL) -> list[SpectralMass]:
    """Masses ``P E_k P`` in V's frame with their ranks.

    The rank is the number of singular values of ``V^dag Z_k`` (whose Gram
    matrix is the mass) above ``tol``.
    """
    out = []
    fh = V.frame.conj().T
    for lam, basis in zip(dec.eigenvalues, dec.bases):
        x = fh @ basis
        sv = np.linalg.svd(x, compute_uv=False)
        out.append(SpectralMass(complex(lam), x @ x.conj().T, int(np.sum(sv > tol))))
    return out


def k_dim_minus_nu(dec: SpectralDecomposition, V: Subspace, tol: float = RANK_TOL) -> int:
    """``dim H - nu`` with ``nu`` the total dimension of eigenvectors orthogonal to V."""
    nu = 0
    fh = V.frame.conj().T
    for basis in dec.bases:
        sv = np.linalg.svd(fh @ basis, compute_uv=False)
        nu += basis.shape[1] - int(np.sum(sv > tol))
    return dec.dim - nu


@dataclass(frozen=True)
class KResult:
    value: int
    raw: float
    residue: float
    method: str


def _k_frobenius(U: UnitaryStep, V: Subspace, tail_tol: float = 1e-12, n_cap: int = 1_000_000) -> KResult:
    if U.truncated:
        raise TruncatedModelError("needs a finite model")
    frame = V.frame
    fh = frame.conj().T
    x = frame
    total = float(np.linalg.norm(x) ** 2)
    prev = total
    for _ in range(n_cap):
        y = U.matrix @ x
        x = y - frame @ (fh @ y)
        term = float(np.vdot(x, x).real)
        total += term
        ratio = term / prev if prev > 0 else 0.0
        prev = term
        if term == 0.0 or (ratio < 1.0 and term * ratio / (1.0 - ratio) < tail_tol and term < tail_tol):
            k = int(round(total))
            return KResult(k, total, abs(total - k), "frobenius_survival")
    raise NotRationalInnerError("surviving Frobenius mass did not decay")


@dataclass(frozen=True, eq=False)
class MatrixSeries:
    """Matrix power series ``sum_m coeffs[m] z^m`` (shape ``(N, d, d)``)."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=complex))

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape + self.coeffs.shape[1:], dtype=complex)
        zz = z[..., None, None]
        for c in self.coeffs[::-1]:
            out = out * zz + c
        return out

    def on_circle(self, m: int) -> np.ndarray:
        """Values at ``exp(2 pi i j / m)``, j = 0..m-1, by FFT (coefficients folded mod m)."""
        n = len(self.coeffs)
        folded = np.zeros((m,) + self.coeffs.shape[1:], dtype=complex)
        for start in range(0, n, m):
            blk = self.coeffs[start : start + m]
            folded[: len(blk)] += blk
        return m * np.fft.ifft(folded, axis=0)


@dataclass(frozen=True)
class BoundaryFunction:
    """Matrix function given by its values on the unit circle.

    ``fn`` maps an array of points ``z`` to matrices of shape ``z.shape + (d, d)``.
    """

    fn: object
    dim: int
    coeffs: tuple = ()

    def on_circle(self, m: int) -> np.ndarray:
        return np.asarray(self.fn(np.exp(2j * np.pi * np.arange(m) / m)), dtype=complex)


def _first_return_series(source) -> MatrixSeries | BoundaryFunction:
    if isinstance(source, AmplitudeSequence):
        if source.kind != "a":
            raise ValueError("expected first-return amplitudes")
        return MatrixSeries(source.mats)
    return source


def _winding_of_det(ahat: MatrixSeries, M: int = 64) -> KResult:
    n = len(ahat.coeffs)
    m = int(M)
    while m < 2 * n:
        m *= 2
    vals = ahat.on_circle(m)
    defect = np.abs(np.matmul(vals.conj().transpose(0, 2, 1), vals) - np.eye(ahat.dim)).max()
    if defect > INNER_TOL:
        raise NotRationalInnerError(f"boundary values are not unitary (defect {defect:.2e})")

    def det_on(z):
        # winding_number samples the uniform grid exp(2 pi i j / len(z))
        return np.linalg.det(ahat.on_circle(len(z)))

    res = winding_number(det_on, M=m)
    if res.residue >= RESIDUE_TOL:
        raise NotRationalInnerError(f"winding residue {res.residue:.2e} is not integral")
    return KResult(res.winding, res.raw, res.residue, "winding")


def k_invariant(method: str, U: UnitaryStep | None = None, V: Subspace | None = None,
                dec: SpectralDecomposition | None = None, a=None) -> KResult:
    """The invariant K by one of three independent routes.

    Parameters
    ----------
    method : {"eigen_ranks", "frobenius_survival", "winding"}
    U, V : finite model and subspace (the first two methods)
    dec : precomputed SpectralDecomposition (optional, eigen_ranks)
    a : AmplitudeSequence or MatrixSeries of first-return amplitudes (winding);
        computed from U, V when omitted
    """
    if method == "eigen_ranks":
        if dec is None:
            dec = spectral_decompose(U)
        k = sum(m.rank for m in subspace_spectral_measure(dec, V))
        return KResult(k, float(k), 0.0, method)
    if method == "frobenius_survival":
        return _k_frobenius(U, V)
    if method == "winding":
        if a is None:
            a = first_return_until_decay(U, V)
        return _winding_of_det(_first_return_series(a))
    raise ValueError(f"unknown method {method!r}")


def matrix_schur_from_amplitudes(a: AmplitudeSequence) -> MatrixSeries:
    """Schur function ``f`` of V with ``a_hat(z) = z f(z)^dag``: ``b_m = a_{m+1}^dag``."""
    if a.kind != "a":
        raise ValueError("expected first-return amplitudes")
    return MatrixSeries(a.mats[1:].conj().transpose(0, 2, 1))


def caratheodory_of_subspace(source, z: complex) -> np.ndarray:
    """Caratheodory function ``F(z)`` of the spectral measure of V.

    ``source`` is either a list of SpectralMass (``F = sum (l + z)/(l - z) M``)
    or the Schur function as a MatrixSeries (``F = 2 (I - z f)^{-1} - I``).
    """
    z = complex(z)
    if isinstance(source, MatrixSeries):
        if abs(z) > 1.0 - 1e-6:
            raise PoleError("series form needs |z| bounded away from 1")
        f = source(z)
        eye = np.eye(source.dim)
        return 2.0 * np.linalg.inv(eye - z * f) - eye
    masses = list(source)
    if abs(z) > 1.0 - 1e-6:
        raise PoleError("mass-sum form needs |z| <= 1 - 1e-6")
    out = np.zeros_like(masses[0].mass)
    for m in masses:
        if abs(m.eigenvalue - z) < 1e-9:
            raise PoleError("evaluation point is too close to an eigenvalue")
        out = out + (m.eigenvalue + z) / (m.eigenvalue - z) * m.mass
    return out


def stieltjes_of_subspace(masses: Sequence[SpectralMass], z: complex) -> np.ndarray:
    """``mu_hat(z) = sum_n mu_n z^n = sum_k M_k / (1 - l_k z)``."""
    out = np.zeros_like(masses[0].mass)
    for m in masses:
        out = out + m.mass / (1.0 - m.eigenvalue * z)
    return out


def _loop_sum(ahat: MatrixSeries, v: np.ndarray, m: int) -> float:
    curve = ahat.on_circle(m) @ v
    # only the curve of this state has to stay on the unit sphere (psi recurrent)
    defect = np.abs(np.linalg.norm(curve, axis=1) - 1.0).max()
    if defect > INNER_TOL:
        raise NotRationalInnerError(f"state does not return with probability one (defect {defect:.2e})")
    overlaps = np.einsum("ji,ji->j", curve.conj(), np.roll(curve, -1, axis=0))
    return float(np.sum(np.angle(overlaps)) / (2 * np.pi))


def berry_phase_loop(source, psi, M: int = 256, V: Subspace | None = None, max_grid: int = 2 ** 15) -> float:
    """Geometric phase of the closed curve ``theta -> a_hat(e^{i theta}) psi``.

    ``source`` is a first-return sequence, a :class:`MatrixSeries` for
    ``a_hat`` or a :class:`BoundaryFunction` with its exact circle values.

    The loop integral ``(1/2 pi i) \\oint <psi(t)|d psi(t)>`` is discretised as
    ``(1/2 pi) sum_j arg <psi_j|psi_{j+1}>`` (each factor small, so principal
    arguments add up without branch jumps), Richardson-refined over M and 2M,
    with the grid doubled until the refined value changes by < 1e-8.
    """
    ahat = _first_return_series(source)
    v = _coords(psi, ahat.dim, V)
    v = v / np.linalg.norm(v)
    m = max(int(M), 2 * len(ahat.coeffs))
    t_m = _loop_sum(ahat, v, m)
    prev = None
    while True:
        t_2m = _loop_sum(ahat, v, 2 * m)
        refined = (4 * t_2m - t_m) / 3
        if prev is not None and abs(refined - prev) < 1e-8:
            return refined
        if 2 * m >= max_grid:
            return refined
        prev, t_m, m = refined, t_2m, 2 * m


# --- reports ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RecurrenceReport:
    R_op: np.ndarray
    R_tail_bound: float
    tau_op: np.ndarray | None
    tau_divergent: bool
    K: int | None
    avg_return_prob: float
    avg_tau: float
    classification: str
    horizon: int
    diagnostics: dict

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "horizon": self.horizon,
            "R_op": self.R_op,
            "R_eigenvalues": np.linalg.eigvalsh(self.R_op)[::-1],
            "R_tail_bound": self.R_tail_bound,
            "tau_op": self.tau_op,
            "tau_divergent": self.tau_divergent,
            "K": self.K,
            "avg_return_prob": self.avg_return_prob,
            "avg_tau": self.avg_tau,
            "classification": self.classification,
            "diagnostics": self.diagnostics,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(to_jsonable(self.as_dict()), **kwargs)


def recurrence_report(a: AmplitudeSequence, recurrence_tol: float = 1e-6, tail: str = "powerlaw") -> RecurrenceReport:
    """Return probability, expected return time and classification of V.

    ``recurrent_finite_tau``: R = I and the averaged return time is finite
    (it is then K / dim V with K an integer); ``recurrent``: R = I but the
    return time diverges; ``not_recurrent``: some state escapes with positive
    probability.
    """
    d = a.subspace_dim
    R = return_probability_operator(a, tail)
    lam_min = float(np.linalg.eigvalsh(R.partial)[0])
    recurrent = 1.0 - (lam_min + min(R.tail_bound, 1.0)) <= recurrence_tol
    tau_op, avg = tau_operator(a, tail, recurrence_tol)
    K = None
    diag = {
        "R_tail_estimate": R.tail_estimate,
        "R_fit": R.fit.as_dict() if R.fit else None,
        "min_R_eigenvalue": lam_min,
        "mass_deficit": float(d - np.trace(R.partial).real),
    }
    if tau_op is not None:
        trace = float(np.trace(tau_op.partial).real)
        diag["tau_trace"] = trace
        diag["tau_tail_bound"] = tau_op.tail_bound
        if abs(trace - round(trace)) < RESIDUE_TOL and tau_op.tail_bound < RESIDUE_TOL:
            K = int(round(trace))
    if recurrent and tau_op is not None:
        cls = "recurrent_finite_tau"
    elif recurrent:
        cls = "recurrent"
    else:
        cls = "not_recurrent"
    return RecurrenceReport(
        R_op=R.partial,
        R_tail_bound=R.tail_bound,
        tau_op=None if tau_op is None else tau_op.partial,
        tau_divergent=tau_op is None,
        K=K,
        avg_return_prob=float(np.trace(R.partial).real / d),
        avg_tau=avg,
        classification=cls,
        horizon=a.horizon,
        diagnostics=diag,
    )


def to_jsonable(obj):
    """Recursively convert arrays and complex numbers for JSON output.

    Complex numbers become ``[re, im]``; arrays become nested lists (row-major);
    non-finite floats become the strings ``"inf"``, ``"-inf"``, ``"nan"``.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()] if obj.ndim else to_jsonable(obj.item())
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(float(obj.real)), to_jsonable(float(obj.imag))]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isfinite(x):
            return x
        return "nan" if np.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, TailFit):
        return to_jsonable(obj.as_dict())
    return obj
