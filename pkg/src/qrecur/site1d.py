"""Site recurrence of 1D coined walks through scalar Schur functions.

For the site x the two-dimensional subspace ``span{|x,up>, |x,down>}`` has the
matrix Schur function

    f_x = [[gamma L, rho R], [rho L, -conj(gamma) R]]

where ``gamma, rho`` belong to the coin at x, ``R`` is the Schur function
seen to the right of the site (parameters ``0, gamma_{x+1}, 0, gamma_{x+2}, ...``)
and ``L`` the one seen to the left (parameters ``0, -conj(gamma_{x-1}), 0, ...``,
terminated by 1 at a reflecting wall).  Everything about return
probabilities and return times of the site then follows from ``L`` and ``R``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateCoinError, InvalidSiteError
from .linops import CoinSpec1D
from .monitor import AmplitudeSequence, BoundaryFunction, berry_phase_loop, renewal_a_to_mu, scalar_first_return
from .schur import (
    SchurParams,
    eval_schur,
    inverse_iterate,
    l2_norm_sq,
    series_mul,
    taylor_coeffs,
    winding_number,
)
from .tails import SeriesEstimate, estimate_sum

__all__ = [
    "CSV_SCHEMA_VERSION",
    "SiteSchur",
    "GammaProjectors",
    "SiteReturn",
    "SiteTau",
    "ConstantCoin",
    "CurveTable",
    "site_schur",
    "site_first_return",
    "qubit_berry_phase",
    "gamma_projectors",
    "site_return_matrix",
    "site_tau_matrix",
    "legendre_values",
    "constant_coin_analytics",
    "constant_line_state_return",
    "state_return_from_site",
    "state_vs_site_curve",
]

CSV_SCHEMA_VERSION = "1.0"
DEFAULT_ORDER = 4096


@dataclass(frozen=True)
class SiteSchur:
    """Scalar ingredients of the site Schur function."""

    gamma: complex
    rho: float
    right: SchurParams
    left: SchurParams
    lattice_kind: str
    x: int

    def __post_init__(self):
        if abs(self.rho ** 2 + abs(self.gamma) ** 2 - 1.0) > 1e-12:
            raise ValueError("rho and gamma are inconsistent")

    def _assemble(self, left, right):
        g, r = self.gamma, self.rho
        out = np.empty(np.shape(left) + (2, 2), dtype=complex)
        out[..., 0, 0] = g * left
        out[..., 0, 1] = r * right
        out[..., 1, 0] = r * left
        out[..., 1, 1] = -np.conj(g) * right
        return out

    def __call__(self, z):
        """Value of the 2x2 Schur function at points of the closed disk."""
        return self._assemble(eval_schur(self.left, z), eval_schur(self.right, z))

    def matrix_series(self, n_max: int) -> np.ndarray:
        """Taylor coefficients, shape ``(n_max + 1, 2, 2)``."""
        left = taylor_coeffs(self.left, n_max).coeffs
        right = taylor_coeffs(self.right, n_max).coeffs
        return self._assemble(left, right)


def _right_params(spec: CoinSpec1D, x: int) -> SchurParams:
    lo, hi = spec.window
    last = spec.n_sites - 1 if spec.kind == "finite" else hi
    prefix = []
    for y in range(x + 1, last + 1):
        prefix += [0j, spec.gamma(y)]
    if spec.kind == "finite":
        return SchurParams(tuple(prefix), terminator=1.0)
    return SchurParams(tuple(prefix), (0j, spec.default))


def _left_params(spec: CoinSpec1D, x: int) -> SchurParams:
    if spec.kind == "line":
        lo, _ = spec.window
        prefix = []
        for y in range(x - 1, lo - 1, -1):
            prefix += [0j, -np.conj(spec.gamma(y))]
        return SchurParams(tuple(prefix), (0j, -np.conj(spec.default)))
    # Schur parameters of the whole walk seen from site 0: (gamma_0, 0, gamma_1, 0, ...)
    seq = []
    for y in range(x):
        seq += [spec.gamma(y), 0j]
    return inverse_iterate(SchurParams(tuple(seq)), 2 * x - 1)


def site_schur(spec: CoinSpec1D, x: int) -> SiteSchur:
    if not spec.valid_site(x):
        raise InvalidSiteError(f"site {x} is not on the {spec.kind} lattice")
    g = spec.gamma(x)
    return SiteSchur(g, spec.rho(x), _right_params(spec, x), _left_params(spec, x), spec.kind, x)


def site_first_return(s: SiteSchur, order: int = DEFAULT_ORDER) -> AmplitudeSequence:
    """First-return amplitudes ``a_0..a_order`` of the site, ``a_{m+1} = b_m^dag``."""
    b = s.matrix_series(order - 1)
    a = np.zeros((order + 1, 2, 2), dtype=complex)
    a[1:] = b.conj().transpose(0, 2, 1)
    return AmplitudeSequence("a", a)


def qubit_berry_phase(s: SiteSchur, psi) -> float:
    """Expected return time of a recurrent site qubit as the geometric phase of its return curve.

    The curve ``a_hat(e^it) psi`` with ``a_hat(z) = z f(conj z)^dagger`` uses
    the site function evaluated on the circle, so no Taylor truncation enters.
    The right function only enters through ``rho psi_0 - gamma psi_1`` and is
    skipped when that weight vanishes (the qubit ``psi1``).
    """
    v = np.asarray(psi, dtype=complex)
    v = v / np.linalg.norm(v)
    skip_right = abs(s.rho * v[0] - s.gamma * v[1]) < 1e-15

    def ahat(z):
        w = np.conj(z)
        left = eval_schur(s.left, w)
        right = np.zeros_like(left) if skip_right else eval_schur(s.right, w)
        return z[:, None, None] * np.conj(s._assemble(left, right)).transpose(0, 2, 1)

    return berry_phase_loop(BoundaryFunction(ahat, 2), psi)


@dataclass(frozen=True, eq=False)
class GammaProjectors:
    """Complementary rank-one projectors of the site with coin ``(gamma, rho)``."""

    lower: np.ndarray
    upper: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray


def gamma_projectors(gamma: complex) -> GammaProjectors:
    g = complex(gamma)
    r = np.sqrt(1.0 - abs(g) ** 2)
    lower = np.array([[r * r, -r * g], [-r * np.conj(g), abs(g) ** 2]], dtype=complex)
    upper = np.array([[abs(g) ** 2, r * g], [r * np.conj(g), r * r]], dtype=complex)
    psi1 = np.array([g, r], dtype=complex)
    psi2 = np.array([r, -np.conj(g)], dtype=complex)
    return GammaProjectors(lower, upper, psi1, psi2)


@dataclass(frozen=True, eq=False)
class SiteReturn:
    """Return-probability matrix of a site.

    ``eigenvalues[i]`` belongs to ``eigenvectors[:, i]``; ``intervals[i]``
    brackets it using the tail intervals of the scalar norms.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    intervals: np.ndarray
    left_norm: SeriesEstimate | None
    right_norm: SeriesEstimate


def _norm(params: SchurParams, order: int, tail: str) -> SeriesEstimate:
    if params.is_terminated:
        # finite Blaschke product: unimodular on the circle
        return SeriesEstimate(1.0, 0.0, 0.0, None, None)
    return l2_norm_sq(taylor_coeffs(params, order), tail=tail)


def site_return_matrix(s: SiteSchur, order: int = DEFAULT_ORDER, tail: str = "powerlaw") -> SiteReturn:
    """``R_x`` from the boundary L2 norms of the left and right functions.

    Reflecting cases (half-line, finite): ``R_x = I - (1 - ||R||^2) Gamma``.
    Line: ``R_x = ||L||^2 I + (||R||^2 - ||L||^2) Gamma``.
    Eigenvectors are the extreme qubits ``psi1 = (gamma, rho)`` and
    ``psi2 = (rho, -conj(gamma))``.
    """
    proj = gamma_projectors(s.gamma)
    right = _norm(s.right, order, tail)
    r_lo, r_hi = right.interval(cap=1.0)
    vecs = np.column_stack([proj.psi1, proj.psi2])
    if s.lattice_kind == "line":
        left = _norm(s.left, order, tail)
        l_lo, l_hi = left.interval(cap=1.0)
        R = left.partial * np.eye(2) + (right.partial - left.partial) * proj.lower
        vals = np.array([left.partial, right.partial])
        intervals = np.array([[l_lo, l_hi], [r_lo, r_hi]])
    else:
        left = None
        R = np.eye(2) - (1.0 - right.partial) * proj.lower
        vals = np.array([1.0, right.partial])
        intervals = np.array([[1.0, 1.0], [r_lo, r_hi]])
    return SiteReturn(R, vals, vecs, intervals, left, right)


@dataclass(frozen=True, eq=False)
class SiteTau:
    """Expected return times of a site.

    ``matrix`` is the full operator on finite lattices; on the half-line only
    ``psi1`` has a finite value, and on the line nothing is finite.
    """

    matrix: np.ndarray | None
    divergent: bool
    finite_qubit: np.ndarray | None
    finite_value: float | None
    left_degree: int | None
    right_degree: int | None

    @property
    def extremes(self) -> tuple[float, float] | None:
        if self.matrix is None:
            return None
        ev = np.linalg.eigvalsh(self.matrix)
        return float(ev[0]), float(ev[-1])

    @property
    def average(self) -> float:
        if self.matrix is None:
            return np.inf
        return float(np.trace(self.matrix).real / 2)


def _degree(params: SchurParams) -> int:
    """Blaschke degree from the winding number of the boundary values."""
    res = winding_number(lambda z: eval_schur(params, z), M=max(64, 8 * (len(params.prefix) + 1)))
    return res.winding


def site_tau_matrix(s: SiteSchur) -> SiteTau:
    """``tau_x = (1 + deg L) I + (deg R - deg L) Gamma`` when both sides are inner."""
    proj = gamma_projectors(s.gamma)
    if s.lattice_kind == "line":
        return SiteTau(None, True, None, None, None, None)
    dl = _degree(s.left)
    if s.lattice_kind == "half_line":
        return SiteTau(None, True, proj.psi1, float(1 + dl), dl, None)
    dr = _degree(s.right)
    T = (1 + dl) * np.eye(2) + (dr - dl) * proj.lower
    return SiteTau(T, False, proj.psi1, float(1 + dl), dl, dr)


def legendre_values(n_max: int, x: float) -> np.ndarray:
    """``P_0(x)..P_{n_max}(x)`` by ``(n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}``."""
    p = np.empty(n_max + 1)
    p[0] = 1.0
    if n_max >= 1:
        p[1] = x
    for n in range(1, n_max):
        p[n + 1] = ((2 * n + 1) * x * p[n] - n * p[n - 1]) / (n + 1)
    return p


@dataclass(frozen=True, eq=False)
class ConstantCoin:
    """Closed forms for the walk with the same coin at every site.

    ``c_n`` are the coefficients with ``R(z) = sum_n conj(c_n) z^n`` for the
    right function; the site first-return amplitudes are ``a_{2n} = d_n * upsilon``
    (odd ones vanish).  ``decay_exponent`` is the log-log slope of the envelope
    of ``|d_n|`` over the last decade.
    """

    gamma: complex
    norm_sq: float
    c: float
    c_n: np.ndarray
    d_n: np.ndarray
    upsilon: np.ndarray
    decay_exponent: float


def _envelope_exponent(d: np.ndarray, block: int = 16) -> float:
    """Decay exponent of ``|d_n|`` from block means of ``|d_n|^2`` over the last decade.

    Averaging over blocks removes the oscillation of the individual terms
    (which can vanish at every other index), so the log-log slope follows
    the envelope.
    """
    n = len(d) - 1
    first = max(1, n // 10)
    sq = np.abs(d[first:]) ** 2
    nb = len(sq) // block
    if nb < 3:
        return np.nan
    means = sq[: nb * block].reshape(nb, block).mean(axis=1)
    centres = first + block * np.arange(nb) + (block - 1) / 2
    keep = means > 0
    if keep.sum() < 3:
        return np.nan
    slope = np.polyfit(np.log(centres[keep]), np.log(means[keep]), 1)[0]
    return float(slope / 2)


def constant_coin_analytics(gamma: complex, n_max: int) -> ConstantCoin:
    g = complex(gamma)
    ag = abs(g)
    if ag == 0.0 or ag >= 1.0:
        raise DegenerateCoinError("constant-coin closed forms need 0 < |gamma| < 1")
    rho = np.sqrt(1.0 - ag ** 2)
    c = 1.0 - 2.0 * ag ** 2
    norm_sq = 2.0 / (np.pi * ag ** 2) * (rho * ag + (1.0 - 2.0 * rho ** 2) * np.arcsin(ag))
    P = legendre_values(n_max // 2 + 2, c)
    cn = np.zeros(n_max + 1, dtype=complex)
    if n_max >= 1:
        cn[1] = np.conj(g)
    for n in range(1, (n_max - 1) // 2 + 1):
        cn[2 * n + 1] = (P[n - 1] - c * P[n]) / (2.0 * g * (n + 1))
    m = n_max // 2
    P2 = legendre_values(m + 1, c)
    dn = np.zeros(m + 1)
    if m >= 1:
        dn[1] = 1.0
    for n in range(2, m + 1):
        dn[n] = (P2[n - 2] - c * P2[n - 1]) / (2.0 * ag ** 2 * n)
    upsilon = np.array([[-ag ** 2, -rho * g], [rho * np.conj(g), -ag ** 2]], dtype=complex)
    return ConstantCoin(g, float(norm_sq), float(c), cn, dn, upsilon, _envelope_exponent(dn))


def state_return_from_site(amplitudes: AmplitudeSequence, psi, tail: str = "powerlaw") -> SeriesEstimate:
    """Return probability of the single state ``psi`` of the site.

    ``<psi|mu_n|psi>`` are the return amplitudes of ``psi`` alone; the scalar
    renewal equation turns them into first-return amplitudes.
    """
    v = np.asarray(psi, dtype=complex)
    v = v / np.linalg.norm(v)
    mu = renewal_a_to_mu(amplitudes) if amplitudes.kind == "a" else amplitudes
    m = np.einsum("i,nij,j->n", v.conj(), mu.mats, v)
    a = scalar_first_return(m)
    return estimate_sum(np.abs(a[1:]) ** 2, start=1, tail=tail)


def constant_line_state_return(gamma: complex, alpha: complex, beta: complex,
                               order: int = DEFAULT_ORDER, tail: str = "powerlaw") -> SeriesEstimate:
    """``||f(z, 0) f(z, c)||^2`` with ``c = gamma - (2 i rho / conj(gamma)) Im(conj(alpha) beta gamma)``,
    where ``f(z, g0)`` has parameters ``(g0, 0, gamma, 0, gamma, ...)``.
    """
    g = complex(gamma)
    rho = np.sqrt(1.0 - abs(g) ** 2)
    c = g - (2j * rho / np.conj(g)) * np.imag(np.conj(alpha) * beta * g)
    tail_params = (0j, g)
    f0 = taylor_coeffs(SchurParams((0j,), tail_params), order).coeffs
    fc = taylor_coeffs(SchurParams((c,), tail_params), order).coeffs
    return l2_norm_sq(series_mul(f0, fc, order), tail=tail)


@dataclass(frozen=True, eq=False)
class CurveTable:
    """Return probabilities along a path of states; one row per parameter value."""

    columns: tuple
    rows: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        buf.write(f"# schema_version={CSV_SCHEMA_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", newline="") as fh:
                fh.write(text)
        return text


def state_vs_site_curve(
    spec: CoinSpec1D,
    x: int,
    qubit_path: Callable[[float], tuple[complex, complex]],
    grid: Sequence[float],
    order: int = 2048,
    tail: str = "powerlaw",
) -> CurveTable:
    """State return probability versus ``<psi|R_x psi>`` along a path of qubits.

    The site's first-return amplitudes come from the Taylor coefficients of the
    site Schur function (``a_{m+1} = b_m^dag``), so this uses the scalar Schur
    data only, independently of any walk simulation.
    """
    s = site_schur(spec, x)
    amps = renewal_a_to_mu(site_first_return(s, order))
    R = site_return_matrix(s, tail=tail)
    rows = []
    for t in grid:
        alpha, beta = qubit_path(t)
        psi = np.array([alpha, beta], dtype=complex)
        psi = psi / np.linalg.norm(psi)
        st = state_return_from_site(amps, psi, tail=tail)
        site_val = float(np.vdot(psi, R.matrix @ psi).real)
        lo, hi = st.interval(cap=1.0)
        rows.append([t, st.partial, lo, hi, site_val])
    cols = ("t", "state_return_prob", "state_lower", "state_upper", "site_return_prob")
    return CurveTable(cols, np.array(rows, dtype=float))
