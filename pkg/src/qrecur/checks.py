"""Seeded invariant checks shared by the ``verify`` command and the test suite.

Each check returns a :class:`CheckResult` holding the worst observed error and
the tolerance it was held to.  ``tol_scale`` multiplies every tolerance, so a
tiny scale forces failures (used to exercise the failure path).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linops import (
    CoinSpec1D,
    CoinSpec2D,
    Subspace,
    build_coined_1d,
    build_coined_2d,
    build_cyclic_shift,
    build_from_matrix,
    build_shift_plus_flip,
    random_unitary,
)
from .monitor import (
    first_return_direct,
    first_return_until_decay,
    k_invariant,
    matrix_schur_from_amplitudes,
    mu_sequence,
    renewal_a_to_mu,
    renewal_mu_to_a,
    return_probability_operator,
    survival,
)
from .schur import (
    SchurParams,
    caratheodory_from_schur,
    caratheodory_transforms,
    eval_schur,
    inverse_iterate,
    iterate,
    khrushchev_Fk,
    khrushchev_G,
    schur_params_from_taylor,
    szego_polynomials,
    taylor_coeffs,
)
from .site1d import site_schur, site_tau_matrix
from .walk2d import Walk2DJob, origin_mu_sequence, r_eigenvalues

__all__ = ["CheckResult", "FAST_CHECKS", "FULL_CHECKS", "run_suite", "random_gammas", "TABLE_ROWS"]

# approximate eigenvalues of the origin return-probability matrix
TABLE_ROWS = {
    ("square", "grover"): (0.6593, 0.4069, 0.4069, 0.2878),
    ("square", "fourier"): (0.5518, 0.3883, 0.3883, 0.2882),
    ("hexagonal", "grover"): (0.8017, 0.2411, 0.2411),
    ("hexagonal", "c0"): (0.6365, 0.6365, 0.5462),
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    error: float
    tol: float
    seconds: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{status}  {self.name:<28} err={self.error:.3e} tol={self.tol:.1e} {self.seconds:6.2f}s{extra}"


def random_gammas(rng: np.random.Generator, n: int, max_modulus: float = 0.9) -> tuple:
    r = max_modulus * np.sqrt(rng.random(n))
    return tuple(r * np.exp(2j * np.pi * rng.random(n)))


def _disk_points(rng: np.random.Generator, n: int, radius: float = 0.95, inner: float = 0.0) -> np.ndarray:
    """Uniform points of the annulus ``inner <= |z| <= radius``."""
    r = np.sqrt(inner ** 2 + (radius ** 2 - inner ** 2) * rng.random(n))
    return r * np.exp(2j * np.pi * rng.random(n))


def _random_model(rng: np.random.Generator, dim: int = 10, sub: int = 3):
    U = build_from_matrix(random_unitary(dim, rng))
    frame = np.linalg.qr(rng.normal(size=(dim, sub)) + 1j * rng.normal(size=(dim, sub)))[0]
    return U, Subspace(U.space, frame)


# --- individual checks: each returns the worst error found ------------------

def _unitarity(rng) -> float:
    worst = 0.0
    models = [build_cyclic_shift(7), build_shift_plus_flip(12)[0], build_from_matrix(random_unitary(9, rng))]
    for n in range(1, 7):
        models.append(build_coined_1d(CoinSpec1D("finite", random_gammas(rng, n)), 4))
    for U in models:
        m = U.dense()
        worst = max(worst, np.abs(m.conj().T @ m - np.eye(U.dim)).max())
    return worst


def _renewal_roundtrip(rng) -> float:
    worst = 0.0
    for _ in range(5):
        U, V = _random_model(rng)
        mu = mu_sequence(U, V, 80)
        a = renewal_mu_to_a(mu)
        back = renewal_a_to_mu(a)
        direct = first_return_direct(U, V, 80)
        worst = max(worst, np.abs(back.mats - mu.mats).max(), np.abs(direct.mats - a.mats).max())
    return worst


def _schur_bound(rng) -> float:
    radii = np.array([0.0, 0.5, 0.9, 0.99, 1.0])
    theta = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    grid = (radii[:, None] * np.exp(1j * theta)[None, :]).ravel()
    worst = 0.0
    for _ in range(10):
        prefix = random_gammas(rng, 8, 0.95)
        for p in (SchurParams(prefix), SchurParams(prefix, terminator=np.exp(1j * rng.random())),
                  SchurParams(prefix, (0j, random_gammas(rng, 1)[0]))):
            worst = max(worst, float(np.abs(eval_schur(p, grid)).max()) - 1.0)
    return max(worst, 0.0)


def _return_prob_bounds(rng) -> float:
    worst = 0.0
    for _ in range(5):
        U, V = _random_model(rng)
        R = return_probability_operator(first_return_until_decay(U, V)).partial
        ev = np.linalg.eigvalsh(R)
        worst = max(worst, -ev[0], ev[-1] - 1.0, np.abs(R - R.conj().T).max())
    spec = CoinSpec1D("half_line", random_gammas(rng, 4), default=0.5)
    U = build_coined_1d(spec, 200, sites=[2])
    V = Subspace.from_labels(U.space, [(2, "up"), (2, "down")])
    ev = np.linalg.eigvalsh(return_probability_operator(first_return_direct(U, V, 200)).partial)
    return max(worst, -ev[0], ev[-1] - 1.0, 0.0)


def _survival_identity(rng) -> float:
    worst = 0.0
    for _ in range(5):
        U, V = _random_model(rng)
        c = rng.normal(size=V.dim_v) + 1j * rng.normal(size=V.dim_v)
        psi = V.embed(c / np.linalg.norm(c))
        s = survival(U, V, psi, 60).s
        a = first_return_direct(U, V, 60)
        v = V.coords(psi)
        terms = np.linalg.norm(a.mats @ v, axis=1) ** 2
        worst = max(worst, np.abs(terms[1:] - (s[:-1] - s[1:])).max(), max(0.0, float(np.diff(s).max())))
    return worst


def _truncation_doubling(rng) -> float:
    worst = 0.0
    spec = CoinSpec1D("line", random_gammas(rng, 5), offset=-2, default=0.4j)
    for h in (20, 40):
        mus = []
        for horizon in (h, 2 * h):
            U = build_coined_1d(spec, horizon, sites=[0])
            V = Subspace.from_labels(U.space, [(0, "up"), (0, "down")])
            mus.append(mu_sequence(U, V, h).mats)
        worst = max(worst, np.abs(mus[0] - mus[1]).max())
    spec2 = CoinSpec2D.named("hexagonal", "c0")
    h = 12
    mus = []
    for horizon in (h, 2 * h):
        U = build_coined_2d(spec2, horizon)
        V = Subspace.from_labels(U.space, [(0, 0, j) for j in range(3)])
        mus.append(mu_sequence(U, V, h).mats)
    mus.append(origin_mu_sequence(Walk2DJob(spec2, h)).mats)
    return max(worst, np.abs(mus[0] - mus[1]).max(), np.abs(mus[0] - mus[2]).max())


def _transform_roundtrip(rng) -> float:
    worst = 0.0
    for _ in range(10):
        p = SchurParams(random_gammas(rng, 6), (0j, random_gammas(rng, 1)[0]))
        for z in _disk_points(rng, 10):
            f = eval_schur(p, z)
            F = caratheodory_transforms("f_to_F", f, z)
            worst = max(worst, abs(caratheodory_transforms("F_to_f", F, z) - f),
                        abs(khrushchev_Fk(p, 0, z) - caratheodory_from_schur(f, z)))
    return worst


def _schur_taylor_roundtrip(rng) -> float:
    worst = 0.0
    for _ in range(10):
        g = random_gammas(rng, 30, 0.6)
        back = schur_params_from_taylor(taylor_coeffs(SchurParams(g), 40), 30).prefix
        worst = max(worst, np.abs(np.array(back) - np.array(g)).max())
    return worst


def _geronimus(rng) -> float:
    worst = 0.0
    for _ in range(5):
        coins = random_gammas(rng, 6, 0.9)
        spec = CoinSpec1D("half_line", coins, default=random_gammas(rng, 1, 0.9)[0])
        U = build_coined_1d(spec, 40, sites=[0])
        V = Subspace.from_labels(U.space, [(0, "up")])
        mu = mu_sequence(U, V, 40).mats[:, 0, 0]
        F = 2.0 * np.conj(mu)
        F[0] = 1.0
        got = np.array(schur_params_from_taylor(caratheodory_transforms("F_to_f", F), 12).prefix)
        want = np.zeros(12, dtype=complex)
        want[0::2] = coins
        worst = max(worst, np.abs(got - want).max())
    return worst


def _appendix_identities(rng) -> float:
    worst = 0.0
    for _ in range(5):
        p = SchurParams(random_gammas(rng, 8, 0.8), (0j, random_gammas(rng, 1, 0.8)[0]))
        z = _disk_points(rng, 20, 0.95)
        poly = szego_polynomials(p, 7)
        f = eval_schur(p, z)
        F = (1 + z * f) / (1 - z * f)
        for k in range(1, 6):
            inv = eval_schur(inverse_iterate(p, k), z)
            e1 = np.abs(inv * poly.eval_phi_star(k + 1, z) - poly.eval_phi(k + 1, z)).max()
            # both sides are O(z^k); the product form avoids dividing them near 0
            fk = eval_schur(iterate(p, k), z)
            lhs = z * fk * (poly.eval_phi(k, z) * F + poly.eval_omega(k, z))
            e2 = np.abs(lhs - (poly.eval_phi_star(k, z) * F - poly.eval_omega_star(k, z))).max()
            G, Gt = khrushchev_G(p, k, z)
            rho = np.sqrt(1 - abs(p[k]) ** 2)
            e3 = np.abs(rho * (khrushchev_Fk(p, k, z) - khrushchev_Fk(p, k + 1, z)) - (p[k] * G + np.conj(p[k]) * Gt)).max()
            e4 = np.abs(Gt * eval_schur(inverse_iterate(p, k - 1), z) - G * eval_schur(iterate(p, k + 1), z)).max()
            worst = max(worst, e1, e2, e3, e4)
    return worst


def _site_pipeline(rng) -> float:
    worst = 0.0
    for kind in ("half_line", "finite", "line"):
        for _ in range(3):
            n = int(rng.integers(2, 7))
            g = random_gammas(rng, n)
            offset = -int(rng.integers(0, n)) if kind == "line" else 0
            default = 0j if kind == "finite" else random_gammas(rng, 1)[0]
            spec = CoinSpec1D(kind, g, offset=offset, default=default)
            x = offset + int(rng.integers(0, n))
            U = build_coined_1d(spec, 31, sites=[x])
            V = Subspace.from_labels(U.space, [(x, "up"), (x, "down")])
            monitored = matrix_schur_from_amplitudes(first_return_direct(U, V, 31)).coeffs[:30]
            worst = max(worst, np.abs(site_schur(spec, x).matrix_series(29) - monitored).max())
    return worst


def _winding_integrality(rng) -> float:
    worst = 0.0
    for n in range(2, 6):
        spec = CoinSpec1D("finite", random_gammas(rng, n))
        U = build_coined_1d(spec, 4)
        for x in range(n):
            V = Subspace.from_labels(U.space, [(x, "up"), (x, "down")])
            k = k_invariant("winding", U, V)
            tau = site_tau_matrix(site_schur(spec, x))
            worst = max(worst, abs(k.value - 2 * n), k.residue, abs(tau.average - n))
    return worst


def _table_reduced(rng, n_max: int = 256) -> float:
    worst = 0.0
    for (lattice, coin), row in TABLE_ROWS.items():
        got = r_eigenvalues(Walk2DJob(CoinSpec2D.named(lattice, coin), n_max))
        lo, hi = got.intervals[:, 0], got.intervals[:, 1]
        # distance from each printed value to the computed interval
        dist = np.maximum(np.maximum(lo - np.array(row), np.array(row) - hi), 0.0)
        worst = max(worst, float(dist.max()))
    return worst


FAST_CHECKS: dict[str, tuple[Callable, float]] = {
    "unitarity": (_unitarity, 1e-12),
    "renewal_roundtrip": (_renewal_roundtrip, 1e-11),
    "schur_bound": (_schur_bound, 1e-10),
    "return_prob_bounds": (_return_prob_bounds, 1e-10),
    "survival_identity": (_survival_identity, 1e-12),
    "truncation_doubling": (_truncation_doubling, 1e-14),
    "transform_roundtrip": (_transform_roundtrip, 1e-10),
    "schur_taylor_roundtrip": (_schur_taylor_roundtrip, 1e-9),
    "geronimus": (_geronimus, 1e-9),
    "appendix_identities": (_appendix_identities, 1e-9),
    "site_pipeline": (_site_pipeline, 1e-9),
    "winding_integrality": (_winding_integrality, 1e-6),
}

FULL_CHECKS: dict[str, tuple[Callable, float]] = {
    **FAST_CHECKS,
    "walk2d_table_n256": (_table_reduced, 1e-2),
}


def run_suite(suite: str = "fast", seed: int = 0, tol_scale: float = 1.0) -> list[CheckResult]:
    """Run every check of ``suite`` with its own generator derived from ``seed``."""
    if suite not in ("fast", "full"):
        raise ValueError(f"unknown suite {suite!r}")
    if not tol_scale > 0:
        raise ValueError("tolerance scale must be positive")
    checks = FAST_CHECKS if suite == "fast" else FULL_CHECKS
    results = []
    for i, (name, (fn, tol)) in enumerate(checks.items()):
        rng = np.random.default_rng([seed, i])
        t0 = time.perf_counter()
        try:
            err = float(fn(rng))
            detail = ""
        except Exception as exc:  # a crash is a failed check, not an aborted suite
            err, detail = np.inf, f"{type(exc).__name__}: {exc}"
        t = tol * tol_scale
        results.append(CheckResult(name, err <= t, err, t, time.perf_counter() - t0, detail))
    return results
