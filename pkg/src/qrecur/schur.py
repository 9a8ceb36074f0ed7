"""Scalar Schur functions on the unit disk.

A Schur function is coded by its Schur (Verblunsky) parameters
``gamma_k = f_k(0)`` where ``f_0 = f`` and

    f_{k+1}(z) = (f_k(z) - gamma_k) / (z (1 - conj(gamma_k) f_k(z))).

Parameter sequences are finite and followed by zeros, terminated by a
unimodular value (rational inner functions), or eventually periodic.  The
module also covers Caratheodory transforms, orthogonal polynomials on the
unit circle, Khrushchev's formula, boundary L2 norms and winding numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.signal import lfilter, oaconvolve

from .errors import (
    DomainError,
    NotSchurClassError,
    PoleError,
    WindingUndefinedError,
)
from .tails import SeriesEstimate, estimate_sum

__all__ = [
    "SchurParams",
    "PowerSeries",
    "PolynomialPair",
    "WindingResult",
    "eval_schur",
    "taylor_coeffs",
    "schur_params_from_taylor",
    "iterate",
    "inverse_iterate",
    "caratheodory_transforms",
    "caratheodory_from_schur",
    "schur_from_caratheodory",
    "szego_polynomials",
    "khrushchev_Fk",
    "khrushchev_G",
    "l2_norm_sq",
    "winding_number",
    "tau_r",
    "series_mul",
    "series_div",
    "matrix_series_inverse",
]

UNIMODULAR_TOL = 1e-12
MAX_DEPTH = 2 ** 14


def _conj(x):
    return np.conj(x)


@dataclass(frozen=True)
class SchurParams:
    """Schur parameter sequence.

    Parameters
    ----------
    prefix : tuple of complex
        Leading parameters, each of modulus < 1.
    tail : tuple of complex
        Block repeated forever after the prefix.  Empty means the sequence
        continues with zeros (the iterate after the prefix is ``f = 0``).
    terminator : complex or None
        Unimodular value ending the sequence right after the prefix.  The
        function is then a finite Blaschke product of degree ``len(prefix)``
        times a constant.
    """

    prefix: tuple = ()
    tail: tuple = ()
    terminator: complex | None = None

    def __post_init__(self):
        prefix = tuple(complex(g) for g in self.prefix)
        tail = tuple(complex(g) for g in self.tail)
        if tail and all(g == 0 for g in tail):
            tail = ()
        for g in prefix + tail:
            if not abs(g) < 1.0:
                raise NotSchurClassError(f"Schur parameter {g} is not inside the unit disk")
        term = self.terminator
        if term is not None:
            term = complex(term)
            if abs(abs(term) - 1.0) > UNIMODULAR_TOL:
                raise NotSchurClassError(f"terminator {term} is not unimodular")
            if tail:
                raise ValueError("a terminated sequence cannot have a periodic tail")
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "terminator", term)

    @classmethod
    def constant_rule(cls, gamma: complex, prefix: Sequence[complex] = ()) -> "SchurParams":
        """``prefix`` followed by ``(0, gamma, 0, gamma, ...)``."""
        return cls(tuple(prefix), (0j, complex(gamma)))

    @property
    def is_terminated(self) -> bool:
        return self.terminator is not None

    @property
    def is_periodic(self) -> bool:
        return bool(self.tail)

    @property
    def degree(self) -> int | None:
        """Number of parameters before the terminator (None if not terminated)."""
        return len(self.prefix) if self.is_terminated else None

    def available(self, k: int) -> bool:
        if k < 0:
            return False
        if self.is_terminated:
            return k <= len(self.prefix)
        return True

    def __getitem__(self, k: int) -> complex:
        if k < 0 or not self.available(k):
            raise IndexError(f"parameter {k} is beyond the terminator")
        n = len(self.prefix)
        if k < n:
            return self.prefix[k]
        if self.is_terminated:
            return self.terminator
        if self.tail:
            return self.tail[(k - n) % len(self.tail)]
        return 0j

    def head(self, n: int) -> list[complex]:
        """First ``n`` parameters, stopping at the terminator (included)."""
        out = []
        for k in range(n):
            if not self.available(k):
                break
            out.append(self[k])
        return out


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """Truncated power series ``sum_n coeffs[n] z^n``.

    ``bounded`` marks Schur-class series (coefficients bounded by 1).
    """

    coeffs: np.ndarray
    bounded: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for c in self.coeffs[::-1]:
            out = out * z + c
        return out

    def __len__(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True, eq=False)
class PolynomialPair:
    """Orthonormal polynomials of the first and second kind, degrees 0..k.

    Each attribute is a ``(k + 1, k + 1)`` array whose row ``j`` holds the
    ascending coefficients of the degree-``j`` polynomial.
    """

    phi: np.ndarray
    phi_star: np.ndarray
    omega: np.ndarray
    omega_star: np.ndarray

    @property
    def degree(self) -> int:
        return self.phi.shape[0] - 1

    @staticmethod
    def _eval(rows: np.ndarray, j: int, z):
        return np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex), rows[j])

    def eval_phi(self, j, z):
        return self._eval(self.phi, j, z)

    def eval_phi_star(self, j, z):
        return self._eval(self.phi_star, j, z)

    def eval_omega(self, j, z):
        return self._eval(self.omega, j, z)

    def eval_omega_star(self, j, z):
        return self._eval(self.omega_star, j, z)


# --- series arithmetic, truncated at a fixed order -------------------------

def series_mul(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Product of two series, coefficients 0..n."""
    a = np.asarray(a, dtype=complex)[: n + 1]
    b = np.asarray(b, dtype=complex)[: n + 1]
    if min(len(a), len(b)) > 256:
        out = oaconvolve(a, b)[: n + 1]
    else:
        out = np.convolve(a, b)[: n + 1]
    if len(out) < n + 1:
        out = np.concatenate([out, np.zeros(n + 1 - len(out), dtype=complex)])
    return out


def series_div(num: np.ndarray, den: np.ndarray, n: int) -> np.ndarray:
    """Quotient series ``num / den`` to order n (``den[0]`` must be non-zero)."""
    den = np.asarray(den, dtype=complex)[: n + 1]
    if den[0] == 0:
        raise PoleError("series division by a series vanishing at 0")
    x = np.zeros(n + 1, dtype=complex)
    num = np.asarray(num, dtype=complex)[: n + 1]
    x[: len(num)] = num
    return lfilter(np.array([1.0 + 0j]), den, x)


def matrix_series_inverse(g: np.ndarray, n: int) -> np.ndarray:
    """Inverse of a matrix power series ``g`` (shape ``(m, d, d)``) to order n."""
    g = np.asarray(g, dtype=complex)
    d = g.shape[1]
    gg = np.zeros((n + 1, d, d), dtype=complex)
    gg[: min(n + 1, len(g))] = g[: n + 1]
    g0inv = np.linalg.inv(gg[0])
    h = np.zeros_like(gg)
    h[0] = g0inv
    for m in range(1, n + 1):
        acc = np.matmul(gg[1 : m + 1], h[m - 1 :: -1][:m]).sum(axis=0)
        h[m] = -g0inv @ acc
    return h


# --- evaluation ------------------------------------------------------------

def _backward(gammas: Sequence[complex], seed, z):
    f = seed
    for g in reversed(gammas):
        zf = z * f
        f = (g + zf) / (1.0 + np.conj(g) * zf)
    return f


def eval_schur(params: SchurParams, z, depth: int | None = None, return_bound: bool = False):
    """Evaluate the Schur function of ``params`` by the backward recursion.

    Parameters
    ----------
    params : SchurParams
    z : complex or array
        Points of the closed unit disk.
    depth : int, optional
        Number of parameters used for periodic sequences.  By default the
        depth doubles until successive values agree to 1e-12 (or 2**14).
    return_bound : bool
        Also return the truncation bound ``2 |z|**depth`` (zero for exact cases).
    """
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1.0 + 1e-12):
        raise DomainError("Schur functions are evaluated on the closed unit disk only")
    if params.is_terminated:
        val = _backward(params.prefix, np.full(z.shape, params.terminator), z)
        bound = np.zeros(z.shape)
    elif not params.is_periodic:
        val = _backward(params.prefix, np.zeros(z.shape, dtype=complex), z)
        bound = np.zeros(z.shape)
    elif depth is not None:
        val = _backward(params.head(depth), np.zeros(z.shape, dtype=complex), z)
        bound = 2.0 * np.abs(z) ** depth
    else:
        d = max(16, len(params.prefix) + len(params.tail))
        val = _backward(params.head(d), np.zeros(z.shape, dtype=complex), z)
        while d < MAX_DEPTH:
            d2 = 2 * d
            val2 = _backward(params.head(d2), np.zeros(z.shape, dtype=complex), z)
            done = np.max(np.abs(val2 - val), initial=0.0) < 1e-12
            val, d = val2, d2
            if done:
                break
        bound = 2.0 * np.abs(z) ** d
    if val.ndim == 0:
        val, bound = complex(val), float(bound)
    return (val, bound) if return_bound else val


def _level_series(gamma: complex, f: np.ndarray, n: int) -> np.ndarray:
    """Series of ``(gamma + z f) / (1 + conj(gamma) z f)`` to order n."""
    zf = np.zeros(n + 1, dtype=complex)
    zf[1:] = f[:n]
    num = zf.copy()
    num[0] += gamma
    if gamma == 0:
        return num
    den = np.conj(gamma) * zf
    den[0] += 1.0
    return series_div(num, den, n)


def _periodic_series(tail: Sequence[complex], n: int) -> np.ndarray:
    """Taylor coefficients of the Schur function with purely periodic parameters.

    Composing one period of the recursion gives a Mobius map
    ``f -> (A f + B) / (C f + D)`` with polynomial entries; the function is
    its fixed point, i.e. the power-series root of ``C f^2 + (D - A) f - B = 0``
    with ``f(0) = tail[0]``.
    """
    p = len(tail) + 1
    a, b, c, d = (np.zeros(p, dtype=complex) for _ in range(4))
    a[0] = d[0] = 1.0

    def times_z(v):
        return np.concatenate([[0j], v[:-1]])

    for g in tail:
        # right-multiply by [[z, g], [conj(g) z, 1]]
        a, b, c, d = (
            times_z(a + np.conj(g) * b), g * a + b,
            times_z(c + np.conj(g) * d), g * c + d,
        )
    e = d - a
    # e[0] = 1, c[0] = 0 by construction
    f = np.zeros(n + 1, dtype=complex)
    q = np.zeros(n + 1, dtype=complex)  # q = f * f
    for m in range(n + 1):
        val = b[m] if m < p else 0j
        for i in range(1, min(p, m + 1)):
            val -= e[i] * f[m - i] + c[i] * q[m - i]
        f[m] = val
        q[m] = np.dot(f[: m + 1], f[m::-1])
    return f


def taylor_coeffs(params: SchurParams, n_max: int) -> PowerSeries:
    """Taylor coefficients ``c_0..c_{n_max}`` of the Schur function.

    The prefix is applied level by level as truncated series
    (``(gamma + z g) / (1 + conj(gamma) z g)`` with one series division per
    level); a periodic tail is first summed in closed form as the power-series
    fixed point of one period.  Coefficient ``c_m`` depends only on
    ``gamma_0..gamma_m``, so long prefixes are cut at ``n_max + 1``.
    """
    n = int(n_max)
    if n < 0:
        raise ValueError("n_max must be non-negative")
    prefix = params.prefix
    if params.is_terminated:
        if len(prefix) > n + 1:
            prefix = prefix[: n + 1]
            f = np.zeros(n + 1, dtype=complex)
        else:
            f = np.zeros(n + 1, dtype=complex)
            f[0] = params.terminator
    elif params.is_periodic:
        if len(prefix) > n + 1:
            prefix = prefix[: n + 1]
            f = np.zeros(n + 1, dtype=complex)
        else:
            f = _periodic_series(params.tail, n)
    else:
        prefix = prefix[: n + 1]
        f = np.zeros(n + 1, dtype=complex)
    for g in reversed(prefix):
        f = _level_series(g, f, n)
    return PowerSeries(f, bounded=True)


def schur_params_from_taylor(series, k_max: int, unimodular_tol: float = 1e-10) -> SchurParams:
    """Forward Schur algorithm on a truncated series.

    Each step consumes one coefficient, so at most ``len(series)`` parameters
    are produced.  A parameter of modulus ``>= 1 - unimodular_tol`` is taken
    as the terminator (rational inner certificate).
    """
    c = np.asarray(series.coeffs if isinstance(series, PowerSeries) else series, dtype=complex)
    if abs(c[0]) > 1.0 + 1e-10:
        raise NotSchurClassError(f"|c_0| = {abs(c[0])} exceeds 1")
    gammas = []
    f = c.copy()
    for _ in range(int(k_max)):
        if len(f) == 0:
            break
        g = f[0]
        if abs(g) >= 1.0 - unimodular_tol:
            return SchurParams(tuple(gammas), terminator=g / abs(g))
        gammas.append(g)
        m = len(f) - 1
        if m == 0:
            break
        num = f.copy()
        num[0] = 0.0
        den = -np.conj(g) * f
        den[0] += 1.0
        q = series_div(num, den, m)
        f = q[1:]
    return SchurParams(tuple(gammas))


# --- iterates --------------------------------------------------------------

def iterate(params: SchurParams, k: int) -> SchurParams:
    """Parameters of the k-th Schur iterate ``f_k`` (drop the first k)."""
    if k < 0:
        raise IndexError("iterate index must be non-negative")
    n = len(params.prefix)
    if params.is_terminated:
        if k > n:
            raise IndexError(f"iterate {k} is beyond the terminator")
        return SchurParams(params.prefix[k:], terminator=params.terminator)
    if k <= n:
        return SchurParams(params.prefix[k:], params.tail)
    if params.tail:
        r = (k - n) % len(params.tail)
        return SchurParams((), params.tail[r:] + params.tail[:r])
    return SchurParams()


def inverse_iterate(params: SchurParams, k: int, continuation: SchurParams | None = None) -> SchurParams:
    """Parameters of the k-th inverse iterate ``f^k``.

    ``(-conj(gamma_k), ..., -conj(gamma_0))`` followed by the terminator 1,
    or, when ``continuation`` holds the parameters ``gamma_{-1}, gamma_{-2}, ...``
    of a two-sided sequence, by their negated conjugates (no terminator).
    ``k = -1`` gives the constant function 1.
    """
    if k < -1:
        raise IndexError("inverse iterate index must be >= -1")
    if k >= 0 and (not params.available(k) or (params.is_terminated and k >= len(params.prefix))):
        raise IndexError(f"parameter {k} is not available")
    rev = tuple(-np.conj(params[j]) for j in range(k, -1, -1))
    if continuation is None:
        return SchurParams(rev, terminator=1.0)
    if continuation.is_terminated:
        raise ValueError("the continuation of a two-sided sequence must be infinite")
    return SchurParams(
        rev + tuple(-np.conj(g) for g in continuation.prefix),
        tuple(-np.conj(g) for g in continuation.tail),
    )


# --- Caratheodory transforms ---------------------------------------------

def _is_matrix(v) -> bool:
    return np.ndim(v) >= 2


def caratheodory_from_schur(f_val, z):
    """``F = (1 + z f) / (1 - z f)``; for matrices ``F = 2 (I - z f)^{-1} - I``."""
    z = complex(z)
    if _is_matrix(f_val):
        f_val = np.asarray(f_val, dtype=complex)
        eye = np.eye(f_val.shape[-1])
        m = eye - z * f_val
        if np.linalg.cond(m) > 1e12:
            raise PoleError("I - z f is singular at this point")
        return 2.0 * np.linalg.inv(m) - eye
    den = 1.0 - z * f_val
    if abs(den) < 1e-12:
        raise PoleError("1 - z f vanishes at this point")
    return (1.0 + z * f_val) / den


def schur_from_caratheodory(F_val, z):
    """``f = (F - 1) / (z (F + 1))``; for matrices ``(1/z)(F - I)(F + I)^{-1}``."""
    z = complex(z)
    if z == 0:
        raise PoleError("pointwise transform is undefined at z = 0; use the series form")
    if _is_matrix(F_val):
        F_val = np.asarray(F_val, dtype=complex)
        eye = np.eye(F_val.shape[-1])
        m = F_val + eye
        if np.linalg.cond(m) > 1e12:
            raise PoleError("F + I is singular at this point")
        return (F_val - eye) @ np.linalg.inv(m) / z
    den = F_val + 1.0
    if abs(den) < 1e-12:
        raise PoleError("F + 1 vanishes at this point")
    return (F_val - 1.0) / (z * den)


def _caratheodory_series_from_schur(coeffs: np.ndarray) -> np.ndarray:
    c = np.asarray(coeffs, dtype=complex)
    n = len(c) - 1
    if c.ndim == 1:
        zf = np.zeros(n + 1, dtype=complex)
        zf[1:] = c[:n]
        num = zf.copy()
        num[0] += 1.0
        den = -zf
        den[0] += 1.0
        return series_div(num, den, n)
    d = c.shape[1]
    g = np.zeros((n + 1, d, d), dtype=complex)
    g[0] = np.eye(d)
    g[1:] = -c[:n]
    out = 2.0 * matrix_series_inverse(g, n)
    out[0] -= np.eye(d)
    return out


def _schur_series_from_caratheodory(coeffs: np.ndarray) -> np.ndarray:
    """Series of ``f`` from the series of ``F`` (one order is lost to the 1/z)."""
    F = np.asarray(coeffs, dtype=complex)
    n = len(F) - 1
    if F.ndim == 1:
        num = F.copy()
        num[0] -= 1.0
        den = F.copy()
        den[0] += 1.0
        zf = series_div(num, den, n)
        return zf[1:]
    d = F.shape[1]
    eye = np.eye(d)
    num = F.copy()
    num[0] -= eye
    den = F.copy()
    den[0] += eye
    inv = matrix_series_inverse(den, n)
    zf = np.zeros_like(F)
    for m in range(n + 1):
        zf[m] = np.matmul(num[: m + 1], inv[m::-1]).sum(axis=0)
    return zf[1:]


def caratheodory_transforms(direction: str, value, z=None):
    """Convert between Schur and Caratheodory functions.

    Parameters
    ----------
    direction : {"f_to_F", "F_to_f"}
    value
        A pointwise value (scalar or square matrix) when ``z`` is given,
        otherwise an array of Taylor coefficients (shape ``(n,)`` or ``(n, d, d)``).
    z : complex, optional
    """
    if direction not in ("f_to_F", "F_to_f"):
        raise ValueError(f"unknown direction {direction!r}")
    if z is None:
        if direction == "f_to_F":
            return _caratheodory_series_from_schur(value)
        return _schur_series_from_caratheodory(value)
    if abs(z) >= 1.0:
        raise DomainError("pointwise transforms need |z| < 1")
    if direction == "f_to_F":
        return caratheodory_from_schur(value, z)
    return schur_from_caratheodory(value, z)


# --- orthogonal polynomials and Khrushchev's formula -----------------------

def _szego_rows(gammas: Sequence[complex], k: int):
    phi = np.zeros((k + 1, k + 1), dtype=complex)
    phis = np.zeros((k + 1, k + 1), dtype=complex)
    phi[0, 0] = phis[0, 0] = 1.0
    for j in range(k):
        g = gammas[j]
        rho = np.sqrt(1.0 - abs(g) ** 2)
        zphi = np.zeros(k + 1, dtype=complex)
        zphi[1:] = phi[j, :k]
        phi[j + 1] = (zphi - np.conj(g) * phis[j]) / rho
        phis[j + 1] = (-g * zphi + phis[j]) / rho
    return phi, phis


def szego_polynomials(params: SchurParams, k: int) -> PolynomialPair:
    """Orthonormal polynomials ``phi_j``, reversed ``phi_j*`` and the second
    kind ``Omega_j``, ``Omega_j*`` for ``j = 0..k``.

    ``rho_j phi_{j+1} = z phi_j - conj(gamma_j) phi_j*`` and
    ``rho_j phi*_{j+1} = -gamma_j z phi_j + phi_j*``; the second kind uses
    ``-gamma_j``.
    """
    if k < 0:
        raise IndexError("degree must be non-negative")
    if params.is_terminated and k > len(params.prefix):
        raise IndexError(f"only {len(params.prefix)} free parameters are available")
    gammas = params.head(k)
    if len(gammas) < k or any(abs(g) >= 1 for g in gammas):
        raise IndexError(f"only {len(params.prefix)} free parameters are available")
    phi, phis = _szego_rows(gammas, k)
    om, oms = _szego_rows([-g for g in gammas], k)
    return PolynomialPair(phi, phis, om, oms)


def _inverse_value(params: SchurParams, k: int, z, continuation=None):
    return eval_schur(inverse_iterate(params, k, continuation), z)


def khrushchev_Fk(params: SchurParams, k: int, z, continuation: SchurParams | None = None):
    """Caratheodory function of ``|phi_k|^2 dmu``:
    ``F_k = (1 + z f^{k-1} f_k) / (1 - z f^{k-1} f_k)`` with ``f^{-1} = 1``.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1.0):
        raise DomainError("Khrushchev's formula is evaluated inside the disk")
    w = z * _inverse_value(params, k - 1, z, continuation) * eval_schur(iterate(params, k), z)
    den = 1.0 - w
    if np.any(np.abs(den) < 1e-12):
        raise PoleError("1 - z f^{k-1} f_k vanishes")
    return (1.0 + w) / den


def khrushchev_G(params: SchurParams, k: int, z, continuation: SchurParams | None = None):
    """Off-diagonal functions ``(G_k, G~_k)`` coupling ``phi_k`` and ``phi_{k+1}``.

    ``G_k = 2 rho_k z f^{k-1} / D`` and ``G~_k = 2 rho_k z f_{k+1} / D`` with
    ``D = (1 - gamma_k z f^{k-1}) (1 - z f^k f_{k+1})``.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1.0):
        raise DomainError("evaluated inside the disk only")
    g = params[k]
    rho = np.sqrt(1.0 - abs(g) ** 2)
    left_prev = _inverse_value(params, k - 1, z, continuation)
    left = _inverse_value(params, k, z, continuation)
    right_next = eval_schur(iterate(params, k + 1), z)
    den = (1.0 - g * z * left_prev) * (1.0 - z * left * right_next)
    if np.any(np.abs(den) < 1e-12):
        raise PoleError("denominator of G_k vanishes")
    return 2.0 * rho * z * left_prev / den, 2.0 * rho * z * right_next / den


# --- norms, windings, tau_r ------------------------------------------------

def l2_norm_sq(series, tail: str = "powerlaw") -> SeriesEstimate:
    """Boundary L2 norm squared ``sum |c_n|^2`` with a tail interval."""
    c = series.coeffs if isinstance(series, PowerSeries) else np.asarray(series, dtype=complex)
    terms = np.abs(c) ** 2
    # index 0 is excluded from the fit but included in the sum
    est = estimate_sum(terms[1:], start=1, tail=tail, partial=float(np.sum(terms)))
    return est


@dataclass(frozen=True)
class WindingResult:
    winding: int
    raw: float
    residue: float
    grid: int


def _spectral_winding(samples: np.ndarray) -> float:
    """``(1/2 pi i) * contour integral of f'/f`` by the trapezoidal rule,
    with ``f'`` from the discrete Fourier derivative of the samples."""
    m = len(samples)
    k = np.fft.fftfreq(m, d=1.0 / m)
    if m % 2 == 0:
        k[m // 2] = 0.0
    deriv = np.fft.ifft(1j * k * np.fft.fft(samples))
    return float(np.mean((deriv / samples).imag))


def winding_number(boundary_fn, M: int = 64, max_grid: int = 2 ** 16, min_modulus: float = 1e-8) -> WindingResult:
    """Winding number of a function on the unit circle around 0.

    Parameters
    ----------
    boundary_fn : callable or array
        Callable evaluated at ``exp(2 pi i j / M)``, or pre-computed samples
        on that grid.
    M : int
        Initial grid size (doubled until each phase increment is below pi/2
        and the spectral estimate settles).

    Returns
    -------
    WindingResult
        ``winding`` counts the unwrapped phase increments; ``residue`` is the
        distance of the spectral (argument-principle) integral from that
        integer, a certificate that the function is smooth and non-vanishing
        at the sampled resolution.
    """
    if callable(boundary_fn):
        m = int(M)
        prev = None
        while True:
            theta = 2 * np.pi * np.arange(m) / m
            w = np.asarray(boundary_fn(np.exp(1j * theta)), dtype=complex)
            res = _winding_from_samples(w, min_modulus)
            steps_ok = res[3] < np.pi / 2
            settled = prev is not None and abs(res[1] - prev) < 1e-10
            if (steps_ok and (settled or res[2] < 1e-12)) or m >= max_grid:
                if not steps_ok:
                    raise WindingUndefinedError("phase increments stay large at the finest grid")
                return WindingResult(res[0], res[1], res[2], m)
            prev = res[1] if steps_ok else None
            m *= 2
    w = np.asarray(boundary_fn, dtype=complex)
    res = _winding_from_samples(w, min_modulus)
    if res[3] >= np.pi / 2:
        raise WindingUndefinedError("grid too coarse: a phase increment exceeds pi/2")
    return WindingResult(res[0], res[1], res[2], len(w))


def _winding_from_samples(w: np.ndarray, min_modulus: float):
    if np.min(np.abs(w)) < min_modulus:
        raise WindingUndefinedError("boundary function (nearly) vanishes on the grid")
    steps = np.angle(np.roll(w, -1) / w)
    integer = int(round(np.sum(steps) / (2 * np.pi)))
    raw = _spectral_winding(w)
    return integer, raw, abs(raw - integer), float(np.max(np.abs(steps)))


def tau_r(series, r: float) -> float:
    """``sum_n n |c_n|^2 r^(2n)`` for ``0 < r < 1``."""
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in (0, 1)")
    c = series.coeffs if isinstance(series, PowerSeries) else np.asarray(series, dtype=complex)
    n = np.arange(len(c))
    return float(np.sum(n * np.abs(c) ** 2 * r ** (2 * n)))
