"""Origin-site recurrence of 2D coined walks with constant coins.

Return amplitudes of the origin site are obtained by evolving each internal
basis state on a box just large enough that nothing beyond it can come back
before the horizon.  The evolution is streamed frame by frame with the coin
applied as a small dense contraction and the shifts as array slices, so the
step operator is never stored.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InvalidDimensionError, MemoryBudgetError
from .linops import CoinSpec2D
from .monitor import (
    AmplitudeSequence,
    OperatorEstimate,
    renewal_mu_to_a,
    return_probability_operator,
)
from .site1d import CurveTable

__all__ = [
    "DEFAULT_MEMORY_BUDGET",
    "DEGENERACY_TOL",
    "Walk2DJob",
    "EigenRow",
    "required_bytes",
    "origin_mu_sequence",
    "r_eigenvalues",
    "subspace_curves_2d",
]

DEFAULT_MEMORY_BUDGET = 2 * 1024 ** 3
DEGENERACY_TOL = 1e-3
_BYTES = 16
# working copies per trajectory: state, coin image and shifted image
_COPIES = 3


@dataclass(frozen=True)
class Walk2DJob:
    """A constant-coin walk on the square or hexagonal lattice up to ``n_max`` steps."""

    spec: CoinSpec2D
    n_max: int
    tail: str = "powerlaw"
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    workers: int = 1

    def __post_init__(self):
        if int(self.n_max) < 1:
            raise InvalidDimensionError("n_max must be at least 1")
        if self.tail not in ("none", "powerlaw"):
            raise ValueError(f"unknown tail policy {self.tail!r}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def box_radius(self) -> int:
        # a path that returns by step n_max never gets further than n_max / 2
        return self.n_max // 2 + 2


def required_bytes(job: Walk2DJob) -> int:
    side = 2 * job.box_radius + 1
    return side * side * job.spec.dim * _BYTES * _COPIES * max(1, job.workers)


def _shift_into(out: np.ndarray, src: np.ndarray, dx: int, dy: int) -> None:
    """``out[x + dx, y + dy] = src[x, y]`` for unit shifts, dropping what leaves the window."""
    def sl(d):
        if d > 0:
            return slice(d, None), slice(None, -d)
        if d < 0:
            return slice(None, d), slice(-d, None)
        return slice(None), slice(None)

    (ox, sx), (oy, sy) = sl(dx), sl(dy)
    out[ox, oy] = src[sx, sy]


def _trajectory(coin: np.ndarray, shifts: Sequence, n_max: int, radius: int, frame: int) -> np.ndarray:
    """Origin components of ``U^n |0, frame>`` for n = 0..n_max (one column of mu_n)."""
    d = coin.shape[0]
    c = radius
    psi = np.zeros((d, 2 * radius + 1, 2 * radius + 1), dtype=complex)
    psi[frame, c, c] = 1.0
    out = np.zeros((n_max + 1, d), dtype=complex)
    out[0] = psi[:, c, c]
    for k in range(n_max):
        # after k steps the support lies within distance k; only points within
        # n_max - k - 1 of the origin can still come back in time
        r = min(k + 1, n_max - k - 1, radius - 1) + 1
        win = slice(c - r, c + r + 1)
        t = np.tensordot(coin, psi[:, win, win], axes=(1, 0))
        moved = np.zeros_like(t)
        for j, (dx, dy) in enumerate(shifts):
            _shift_into(moved[j], t[j], dx, dy)
        psi[:, win, win] = moved
        out[k + 1] = psi[:, c, c]
    return out


def origin_mu_sequence(job: Walk2DJob) -> AmplitudeSequence:
    """Exact ``mu_n = P U^n P`` on the origin site for n = 0..n_max.

    Raises
    ------
    MemoryBudgetError
        When the streamed state would exceed ``job.memory_budget``.
    """
    need = required_bytes(job)
    if need > job.memory_budget:
        raise MemoryBudgetError(
            f"horizon {job.n_max} needs about {need / 2**20:.0f} MiB (budget {job.memory_budget / 2**20:.0f} MiB)",
            need,
        )
    spec = job.spec
    d = spec.dim

    def run(f):
        return _trajectory(spec.coin, spec.shifts, job.n_max, job.box_radius, f)

    if job.workers > 1:
        with ThreadPoolExecutor(max_workers=job.workers) as pool:
            cols = list(pool.map(run, range(d)))
    else:
        cols = [run(f) for f in range(d)]
    mats = np.stack(cols, axis=2)
    mats[0] = np.eye(d)
    return AmplitudeSequence("mu", mats)


@dataclass(frozen=True, eq=False)
class EigenRow:
    """Eigenvalues of the origin return-probability matrix, sorted descending.

    ``intervals[i] = [lower, upper]``; ``degenerate`` lists index pairs of
    neighbours closer than ``DEGENERACY_TOL``.
    """

    eigenvalues: np.ndarray
    intervals: np.ndarray
    degenerate: list
    operator: OperatorEstimate
    n_max: int
    lattice: str

    def as_dict(self) -> dict:
        fit = self.operator.fit
        return {
            "lattice": self.lattice,
            "n_max": self.n_max,
            "eigenvalues": self.eigenvalues.tolist(),
            "intervals": self.intervals.tolist(),
            "degenerate_pairs": [list(p) for p in self.degenerate],
            "tail_bound": self.operator.tail_bound,
            "tail_fit": fit.as_dict() if fit is not None else None,
        }


def _degenerate_pairs(ev: np.ndarray, tol: float) -> list:
    return [(i, i + 1) for i in range(len(ev) - 1) if abs(ev[i] - ev[i + 1]) < tol]


def r_eigenvalues(job: Walk2DJob, mu: AmplitudeSequence | None = None) -> EigenRow:
    """Eigenvalues of ``R = sum_n a_n^dag a_n`` for the origin site with tail intervals."""
    if mu is None:
        mu = origin_mu_sequence(job)
    a = renewal_mu_to_a(mu)
    op = return_probability_operator(a, tail=job.tail)
    ev = op.eigenvalues
    return EigenRow(ev, op.eigen_intervals(cap=1.0), _degenerate_pairs(ev, DEGENERACY_TOL), op, job.n_max, job.spec.lattice)


def _check_nested(frames: Sequence[np.ndarray], d: int) -> list:
    out = []
    prev = None
    for w in frames:
        w = np.asarray(w, dtype=complex)
        if w.ndim == 1:
            w = w[:, None]
        if w.shape[0] != d:
            raise InvalidDimensionError(f"frames must have {d} rows")
        if np.abs(w.conj().T @ w - np.eye(w.shape[1])).max() > 1e-12:
            raise DomainError("frame vectors are not orthonormal")
        if prev is not None:
            # every column of the previous frame must lie in the span of this one
            resid = prev - w @ (w.conj().T @ prev)
            if np.abs(resid).max() > 1e-10:
                raise DomainError("subspaces are not nested")
        out.append(w)
        prev = w
    return out


def subspace_curves_2d(
    mu: AmplitudeSequence,
    frames: Callable[[float], Sequence[np.ndarray]],
    grid: Sequence[float],
    tail: str = "powerlaw",
) -> CurveTable:
    """Return probabilities of nested subspaces of the origin site along a path.

    Parameters
    ----------
    mu : AmplitudeSequence
        Origin return amplitudes, e.g. from :func:`origin_mu_sequence`.
    frames : callable
        ``t -> [W_1, W_2, ...]``, orthonormal frames in site coordinates with
        ``span W_1 ⊂ span W_2 ⊂ ...``.  The first one is usually a single state.
    grid : sequence of float

    Notes
    -----
    A subspace's return probability is ``<psi|R_W|psi>`` for the path state
    ``psi = W_1[:, 0]``, where ``R_W`` is built from first-return amplitudes
    of W obtained by renewal from ``W^dag mu_n W``.  The full site is appended
    as the last column.
    """
    d = mu.subspace_dim
    rows = []
    n_cols = None
    for t in grid:
        ws = _check_nested(frames(t), d)
        psi = ws[0][:, 0]
        vals = []
        for w in ws + [np.eye(d, dtype=complex)]:
            a = renewal_mu_to_a(mu.restrict(w))
            op = return_probability_operator(a, tail=tail)
            v = w.conj().T @ psi
            p = float(np.vdot(v, op.partial @ v).real)
            vals += [p, min(p + op.tail_bound, 1.0)]
        if n_cols is None:
            n_cols = len(ws)
        rows.append([t] + vals)
    cols = ["t"]
    for i in range(n_cols):
        cols += [f"sub{i + 1}_return_prob", f"sub{i + 1}_upper"]
    cols += ["site_return_prob", "site_upper"]
    return CurveTable(tuple(cols), np.array(rows, dtype=float))
