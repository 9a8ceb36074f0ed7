"""State spaces, local unitary steps and lattice builders.

Infinite lattices are replaced by finite truncations sized from a step
horizon ``n_max``.  Strict locality makes ``P U^n P`` exact for ``n <= n_max``
as long as the states involved start inside the trusted region, so nothing
downstream is an approximation of the infinite model up to that horizon.

Basis conventions
-----------------
1D walks
    ``(x, "up")`` then ``(x, "down")`` for increasing ``x``; on the half-line
    and on finite lattices this is ``e_{2x} = |x,up>`` and ``e_{2x+1} = |x,down>``.
Square lattice
    internal order right, up, left, down (shifts +e1, +e2, -e1, -e2).
Hexagonal (three-direction) lattice
    internal order along the vectors (1, 0), (0, 1), (-1, -1) of the
    triangular lattice written in integer coordinates; these point at 0, 120
    and 240 degrees in the isometric picture (counterclockwise).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    DomainError,
    HorizonExceededError,
    InvalidCoinError,
    InvalidDimensionError,
    TruncationTooSmallError,
)

__all__ = [
    "SPARSE_THRESHOLD",
    "StateSpace",
    "UnitaryStep",
    "Subspace",
    "CoinSpec1D",
    "CoinSpec2D",
    "GROVER_4",
    "FOURIER_4",
    "GROVER_3",
    "FOURIER_3",
    "C0_3",
    "NAMED_COINS",
    "SQUARE_SHIFTS",
    "HEXAGONAL_SHIFTS",
    "coin_matrix_1d",
    "build_from_matrix",
    "build_cyclic_shift",
    "build_shift_plus_flip",
    "build_coined_1d",
    "build_coined_2d",
    "apply_power",
    "basis_state",
    "random_unitary",
]

SPARSE_THRESHOLD = 4096
UP, DOWN = "up", "down"

_S2 = np.sqrt(2.0)
GROVER_4 = 0.5 * np.array(
    [[-1, 1, 1, 1], [1, -1, 1, 1], [1, 1, -1, 1], [1, 1, 1, -1]], dtype=complex
)
FOURIER_4 = 0.5 * np.array(
    [[1, 1, 1, 1], [1, 1j, -1, -1j], [1, -1, 1, -1], [1, -1j, -1, 1j]], dtype=complex
)
GROVER_3 = np.array([[-1, 2, 2], [2, -1, 2], [2, 2, -1]], dtype=complex) / 3.0
_W3 = np.exp(2j * np.pi / 3)
FOURIER_3 = np.array(
    [[1, 1, 1], [1, _W3, _W3.conjugate()], [1, _W3.conjugate(), _W3]], dtype=complex
) / np.sqrt(3.0)
C0_3 = np.array([[0, 0, _S2], [1, 1, 0], [1, -1, 0]], dtype=complex) / _S2

NAMED_COINS = {
    "square": {"grover": GROVER_4, "fourier": FOURIER_4},
    "hexagonal": {"grover": GROVER_3, "fourier": FOURIER_3, "c0": C0_3},
}

# displacement of each internal state
SQUARE_SHIFTS = ((1, 0), (0, 1), (-1, 0), (0, -1))
HEXAGONAL_SHIFTS = ((1, 0), (0, 1), (-1, -1))


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Ordered, labelled orthonormal basis of a finite-dimensional space."""

    labels: tuple
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels:
            raise InvalidDimensionError("a state space needs at least one basis state")
        index = {lab: i for i, lab in enumerate(labels)}
        if len(index) != len(labels):
            raise ValueError("basis labels must be unique")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", index)

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, label: Hashable) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise DomainError(f"label {label!r} is not in this space") from None

    def __contains__(self, label) -> bool:
        return label in self._index


@dataclass(frozen=True, eq=False)
class UnitaryStep:
    """A strictly local unitary step, possibly a truncation of an infinite model.

    Attributes
    ----------
    space : StateSpace
    matrix : ndarray or scipy.sparse.csr_matrix
        Dense below ``SPARSE_THRESHOLD`` basis states, CSR above.
    locality_radius : int
        Matrix entries vanish between basis states further apart than this
        in the lattice graph.
    truncation_margin : int
        Number of boundary layers of the truncation that are not trusted.
    horizon : int or None
        Largest step count for which evolution of trusted states is exact.
        ``None`` marks a genuinely finite model.
    trusted : ndarray of bool or None
        Basis states from which evolution up to ``horizon`` is exact.
    """

    space: StateSpace
    matrix: object
    locality_radius: int = 1
    truncation_margin: int = 0
    horizon: int | None = None
    trusted: np.ndarray | None = None

    def __post_init__(self):
        m = self.matrix
        if sp.issparse(m):
            m = sp.csr_matrix(m, dtype=complex)
            if m.shape[0] < SPARSE_THRESHOLD:
                m = m.toarray()
        else:
            m = np.asarray(m, dtype=complex)
            if m.shape[0] >= SPARSE_THRESHOLD:
                m = sp.csr_matrix(m)
        if m.shape != (self.space.dim, self.space.dim):
            raise InvalidDimensionError(
                f"matrix shape {m.shape} does not match space dimension {self.space.dim}"
            )
        object.__setattr__(self, "matrix", m)
        if self.trusted is not None:
            mask = np.asarray(self.trusted, dtype=bool)
            if mask.shape != (self.space.dim,):
                raise InvalidDimensionError("trusted mask has the wrong length")
            object.__setattr__(self, "trusted", mask)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def truncated(self) -> bool:
        return self.horizon is not None

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.array(self.matrix)

    def __matmul__(self, x):
        return self.matrix @ x

    def locality_graph(self) -> list[np.ndarray]:
        """Indices reachable from each basis state in one step."""
        csc = sp.csc_matrix(self.matrix)
        return [csc.indices[csc.indptr[k]:csc.indptr[k + 1]] for k in range(self.dim)]

    def check_horizon(self, n: int) -> None:
        if self.horizon is not None and n > self.horizon:
            raise HorizonExceededError(
                f"{n} steps requested but the truncation is exact only up to {self.horizon}"
            )

    def check_support(self, vectors: np.ndarray, tol: float = 1e-12) -> None:
        """Refuse vectors with weight outside the trusted region."""
        if self.trusted is None:
            return
        v = np.asarray(vectors)
        if v.ndim == 1:
            v = v[:, None]
        leak = np.abs(v[~self.trusted]).max(initial=0.0)
        if leak > tol:
            raise DomainError("vector has weight outside the trusted region of the truncation")


@dataclass(frozen=True, eq=False)
class Subspace:
    """Absorbing subspace V given by an orthonormal frame (columns)."""

    space: StateSpace
    frame: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frame, dtype=complex)
        if f.ndim == 1:
            f = f[:, None]
        if f.shape[0] != self.space.dim or f.shape[1] == 0 or f.shape[1] > self.space.dim:
            raise InvalidDimensionError(f"frame shape {f.shape} does not fit the space")
        gram = f.conj().T @ f
        if np.abs(gram - np.eye(f.shape[1])).max() > 1e-12:
            raise DomainError("frame vectors are not orthonormal")
        object.__setattr__(self, "frame", f)

    @classmethod
    def from_labels(cls, space: StateSpace, labels: Iterable[Hashable]) -> "Subspace":
        idx = [space.index(lab) for lab in labels]
        f = np.zeros((space.dim, len(idx)), dtype=complex)
        f[idx, np.arange(len(idx))] = 1.0
        return cls(space, f)

    @classmethod
    def from_vectors(cls, space: StateSpace, vectors: Sequence[np.ndarray]) -> "Subspace":
        """Frame from vectors that are already orthonormal."""
        return cls(space, np.column_stack(vectors))

    @property
    def dim_v(self) -> int:
        return self.frame.shape[1]

    def projector(self) -> np.ndarray:
        return self.frame @ self.frame.conj().T

    def coords(self, psi: np.ndarray) -> np.ndarray:
        """Coordinates of ``psi`` in the frame, refusing states outside V."""
        psi = np.asarray(psi, dtype=complex)
        c = self.frame.conj().T @ psi
        if np.linalg.norm(psi - self.frame @ c) > 1e-10:
            raise DomainError("state does not lie in the subspace")
        return c

    def embed(self, coords: np.ndarray) -> np.ndarray:
        return self.frame @ np.asarray(coords, dtype=complex)


@dataclass(frozen=True)
class CoinSpec1D:
    """Site-dependent coins of a 1D coined walk.

    The coin at site x is ``[[rho, -gamma], [conj(gamma), rho]]`` with
    ``rho = sqrt(1 - |gamma|^2)``.

    Parameters
    ----------
    kind : {"half_line", "finite", "line"}
    gammas : sequence of complex
        Explicit coin parameters for sites ``offset, offset + 1, ...``.
        For ``finite`` this lists every site.
    offset : int
        Site of ``gammas[0]``; must be 0 unless ``kind == "line"``.
    default : complex
        Parameter used outside the explicit window (half-line and line).
    """

    kind: str
    gammas: tuple
    offset: int = 0
    default: complex = 0j

    def __post_init__(self):
        if self.kind not in ("half_line", "finite", "line"):
            raise ValueError(f"unknown lattice kind {self.kind!r}")
        gammas = tuple(complex(g) for g in self.gammas)
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "default", complex(self.default))
        if self.kind == "finite" and not gammas:
            raise InvalidDimensionError("a finite lattice needs at least one site")
        if self.kind != "line" and self.offset != 0:
            raise ValueError("offset is only meaningful on the line")
        for g in gammas + (self.default,):
            if not abs(g) < 1.0:
                raise InvalidCoinError(f"coin parameter {g} has modulus >= 1")

    @classmethod
    def constant(cls, kind: str, gamma: complex, n_sites: int | None = None) -> "CoinSpec1D":
        if kind == "finite":
            return cls("finite", (gamma,) * int(n_sites))
        return cls(kind, (), 0, gamma)

    @property
    def n_sites(self) -> int | None:
        return len(self.gammas) if self.kind == "finite" else None

    @property
    def window(self) -> tuple[int, int]:
        """First and last site with an explicit coin (empty window -> (offset, offset - 1))."""
        return self.offset, self.offset + len(self.gammas) - 1

    def valid_site(self, x: int) -> bool:
        if self.kind == "finite":
            return 0 <= x < len(self.gammas)
        if self.kind == "half_line":
            return x >= 0
        return True

    def gamma(self, x: int) -> complex:
        if not self.valid_site(x):
            raise DomainError(f"site {x} is not on this lattice")
        i = x - self.offset
        if 0 <= i < len(self.gammas):
            return self.gammas[i]
        return self.default

    def rho(self, x: int) -> float:
        return float(np.sqrt(1.0 - abs(self.gamma(x)) ** 2))


def coin_matrix_1d(gamma: complex) -> np.ndarray:
    rho = np.sqrt(1.0 - abs(gamma) ** 2)
    return np.array([[rho, -gamma], [np.conj(gamma), rho]], dtype=complex)


@dataclass(frozen=True, eq=False)
class CoinSpec2D:
    """Constant coin on the square or hexagonal lattice.

    Internal state j moves by ``shifts[j]`` after the coin.  The default order
    is (1,0), (0,1), (-1,0), (0,-1) on the square lattice and (1,0), (0,1),
    (-1,-1) on the hexagonal (three-direction) lattice; ``directions`` may
    reorder them.
    """

    lattice: str
    coin: np.ndarray
    directions: tuple = ()

    def __post_init__(self):
        if self.lattice not in ("square", "hexagonal"):
            raise ValueError(f"unknown lattice {self.lattice!r}")
        c = np.asarray(self.coin, dtype=complex)
        d = 4 if self.lattice == "square" else 3
        if c.shape != (d, d):
            raise InvalidCoinError(f"{self.lattice} lattice needs a {d}x{d} coin")
        if np.abs(c.conj().T @ c - np.eye(d)).max() > 1e-12:
            raise InvalidCoinError("coin is not unitary")
        object.__setattr__(self, "coin", c)
        if self.directions:
            dirs = tuple(tuple(int(v) for v in s) for s in self.directions)
            default = SQUARE_SHIFTS if self.lattice == "square" else HEXAGONAL_SHIFTS
            if sorted(dirs) != sorted(default):
                raise InvalidCoinError("directions must be a reordering of the lattice steps")
            object.__setattr__(self, "directions", dirs)

    @classmethod
    def named(cls, lattice: str, name: str) -> "CoinSpec2D":
        try:
            return cls(lattice, NAMED_COINS[lattice][name])
        except KeyError:
            raise InvalidCoinError(f"no coin named {name!r} for the {lattice} lattice") from None

    @property
    def dim(self) -> int:
        return self.coin.shape[0]

    @property
    def shifts(self) -> tuple:
        if self.directions:
            return self.directions
        return SQUARE_SHIFTS if self.lattice == "square" else HEXAGONAL_SHIFTS


def build_from_matrix(matrix, labels: Sequence | None = None, tol: float = 1e-12) -> UnitaryStep:
    """Wrap an explicit unitary matrix as a genuinely finite model."""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidDimensionError("need a non-empty square matrix")
    if np.abs(m.conj().T @ m - np.eye(m.shape[0])).max() > tol:
        raise ValueError("matrix is not unitary")
    labels = tuple(range(m.shape[0])) if labels is None else tuple(labels)
    return UnitaryStep(StateSpace(labels), m, locality_radius=m.shape[0])


def build_cyclic_shift(n: int) -> UnitaryStep:
    """Permutation unitary ``|k> -> |k+1 mod n>``."""
    if n < 1:
        raise InvalidDimensionError("cyclic shift needs at least one state")
    m = np.zeros((n, n), dtype=complex)
    m[(np.arange(n) + 1) % n, np.arange(n)] = 1.0
    return UnitaryStep(StateSpace(tuple(range(n))), m, locality_radius=1)


def build_shift_plus_flip(width: int):
    """Spin flip on C^2 plus a translation on sites ``-width..width``.

    The translation wraps around at the edge, so the truncated operator is
    unitary; the wrap is reached only after ``width`` steps from site 0.

    Returns
    -------
    U : UnitaryStep
    psi, phi : ndarray
        ``|up>`` and ``(|down> + |0>)/sqrt(2)``.
    """
    if width < 2:
        raise TruncationTooSmallError("truncation half-width must be at least 2")
    sites = list(range(-width, width + 1))
    labels = [("spin", UP), ("spin", DOWN)] + [("site", x) for x in sites]
    space = StateSpace(tuple(labels))
    dim = space.dim
    m = np.zeros((dim, dim), dtype=complex)
    m[1, 0] = m[0, 1] = 1.0
    for x in sites:
        y = x + 1 if x < width else -width
        m[space.index(("site", y)), space.index(("site", x))] = 1.0
    trusted = np.zeros(dim, dtype=bool)
    trusted[[0, 1, space.index(("site", 0))]] = True
    U = UnitaryStep(space, m, locality_radius=1, truncation_margin=1, horizon=width, trusted=trusted)
    psi = basis_state(space, ("spin", UP))
    phi = (basis_state(space, ("spin", DOWN)) + basis_state(space, ("site", 0))) / _S2
    return U, psi, phi


def _coined_chain(gammas: Sequence[complex]) -> sp.csr_matrix:
    """``S C`` on consecutive sites with reflecting ends at both edges."""
    n = len(gammas)
    rows, cols, vals = [], [], []
    for i, g in enumerate(gammas):
        c = coin_matrix_1d(g)
        up, down = 2 * i, 2 * i + 1
        # S|i,up> = |i+1,up>, reflected into |i,down> at the right edge
        t_up = 2 * (i + 1) if i < n - 1 else down
        # S|i,down> = |i-1,down>, reflected into |i,up> at the left edge
        t_down = 2 * (i - 1) + 1 if i > 0 else up
        for k, col in ((0, up), (1, down)):
            for target, coef in ((t_up, c[0, k]), (t_down, c[1, k])):
                if coef != 0:
                    rows.append(target)
                    cols.append(col)
                    vals.append(coef)
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n), dtype=complex)


def build_coined_1d(spec: CoinSpec1D, horizon: int, sites: Iterable[int] | None = None) -> UnitaryStep:
    """Coined walk ``U = S C`` on the half-line, a finite lattice or the line.

    Parameters
    ----------
    spec : CoinSpec1D
    horizon : int
        Step horizon.  Infinite lattices are cut ``horizon + 2`` sites beyond
        the region of interest and closed with reflecting ends there.
    sites : iterable of int, optional
        Region of interest; defaults to the explicit coin window (or site 0).
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if spec.kind == "finite":
        sites_all = list(range(spec.n_sites))
        m = _coined_chain(spec.gammas)
        labels = [(x, s) for x in sites_all for s in (UP, DOWN)]
        return UnitaryStep(StateSpace(tuple(labels)), m, locality_radius=1)

    if sites is None:
        lo, hi = spec.window
        region = [lo, max(lo, hi)]
    else:
        region = list(sites)
        if not region:
            raise ValueError("empty region of interest")
    for x in region:
        if not spec.valid_site(x):
            raise DomainError(f"site {x} is not on this lattice")
    margin = horizon + 2
    r_lo, r_hi = min(region), max(region)
    lo = 0 if spec.kind == "half_line" else r_lo - margin
    hi = r_hi + margin
    xs = list(range(lo, hi + 1))
    m = _coined_chain([spec.gamma(x) for x in xs])
    labels = [(x, s) for x in xs for s in (UP, DOWN)]
    trusted = np.repeat([(r_lo <= x <= r_hi) for x in xs], 2)
    return UnitaryStep(
        StateSpace(tuple(labels)), m, locality_radius=1, truncation_margin=1,
        horizon=horizon, trusted=trusted,
    )


def build_coined_2d(spec: CoinSpec2D, horizon: int) -> UnitaryStep:
    """Coined walk ``U = S C`` on a periodic box around the origin.

    The box has side ``2 (horizon + 2) + 1``; a path has to travel more than
    ``horizon`` steps before it can feel the periodic identification, so
    return amplitudes at the origin are those of the infinite lattice.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    radius = horizon + 2
    side = 2 * radius + 1
    d = spec.dim
    coords = np.arange(-radius, radius + 1)
    labels = [(int(x), int(y), j) for x in coords for y in coords for j in range(d)]

    def flat(ix, iy, j):
        return (ix * side + iy) * d + j

    ix, iy = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    ix, iy = ix.ravel(), iy.ravel()
    rows, cols, vals = [], [], []
    for k in range(d):
        src = flat(ix, iy, k)
        for j, (dx, dy) in enumerate(spec.shifts):
            if spec.coin[j, k] == 0:
                continue
            dst = flat((ix + dx) % side, (iy + dy) % side, j)
            rows.append(dst)
            cols.append(src)
            vals.append(np.full(src.shape, spec.coin[j, k]))
    dim = side * side * d
    m = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim), dtype=complex,
    )
    trusted = np.zeros(dim, dtype=bool)
    trusted[flat(radius, radius, np.arange(d))] = True
    return UnitaryStep(
        StateSpace(tuple(labels)), m, locality_radius=1, truncation_margin=1,
        horizon=horizon, trusted=trusted,
    )


def apply_power(U: UnitaryStep, psi: np.ndarray, n: int) -> np.ndarray:
    """``U^n psi`` by repeated application (also accepts a block of columns)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    U.check_horizon(n)
    out = np.asarray(psi, dtype=complex)
    if out.shape[0] != U.dim:
        raise InvalidDimensionError("state does not belong to this space")
    U.check_support(out)
    for _ in range(n):
        out = U.matrix @ out
    return out


def basis_state(space: StateSpace, label: Hashable) -> np.ndarray:
    v = np.zeros(space.dim, dtype=complex)
    v[space.index(label)] = 1.0
    return v


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / _S2
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
