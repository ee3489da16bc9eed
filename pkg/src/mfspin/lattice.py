"""Finite-volume operators for translation-invariant spin models.

Conventions, fixed for reproducibility:

* sites of a box volume are ordered lexicographically over their
  coordinates (row-major), and tensor legs follow that order;
* boundary conditions are open (free): a translated term enters a sum
  only if its whole support fits inside the box, with no wrap-around;
* empirical averages divide by the number of sites ``|vol|``, not by the
  number of admissible translates, so multi-site observables pick up a
  surface-order deficit that the extrapolation machinery measures.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import prod

import numpy as np

from .errors import (
    DimensionCapExceeded,
    NoAdmissibleTranslate,
    SupportOutOfVolume,
)

# Dense-path dimension cap: full eigendecompositions stay tractable below this.
DENSE_DIM_CAP = 2 ** 14

HERMITICITY_TOL = 1e-12

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def _hermitize(matrix: np.ndarray, what: str) -> np.ndarray:
    """Validate Hermiticity in max-norm and return the symmetrized matrix."""
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{what}: expected a square matrix, got shape {matrix.shape}")
    scale = max(1.0, float(np.abs(matrix).max()) if matrix.size else 1.0)
    defect = float(np.abs(matrix - matrix.conj().T).max()) if matrix.size else 0.0
    if defect > HERMITICITY_TOL * scale:
        raise ValueError(f"{what}: not Hermitian (max asymmetry {defect:.3e})")
    return 0.5 * (matrix + matrix.conj().T)


def spectral_norm(matrix: np.ndarray) -> float:
    """Operator 2-norm; uses eigvalsh when the matrix is Hermitian."""
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        return 0.0
    if np.abs(matrix - matrix.conj().T).max() <= 1e-12 * max(1.0, np.abs(matrix).max()):
        return float(np.abs(np.linalg.eigvalsh(matrix)).max())
    return float(np.linalg.norm(matrix, 2))


@dataclass(frozen=True)
class Volume:
    """A box of lattice sites with lexicographic (row-major) site indexing."""

    extents: tuple[int, ...]

    def __post_init__(self):
        extents = tuple(int(e) for e in self.extents)
        if not extents or any(e < 1 for e in extents):
            raise ValueError(f"extents must be positive integers, got {self.extents}")
        object.__setattr__(self, "extents", extents)

    @classmethod
    def chain(cls, length: int) -> "Volume":
        return cls((length,))

    @property
    def dimension(self) -> int:
        return len(self.extents)

    @property
    def n_sites(self) -> int:
        return prod(self.extents)

    def sites(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(e) for e in self.extents)))

    def site_index(self, site: tuple[int, ...]) -> int:
        idx = 0
        for coord, extent in zip(site, self.extents):
            idx = idx * extent + coord
        return idx

    def contains(self, site: tuple[int, ...]) -> bool:
        return all(0 <= c < e for c, e in zip(site, self.extents))


@dataclass(frozen=True, eq=False)
class DenseHermitian:
    """A dense Hermitian matrix on a full finite-volume Hilbert space."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _hermitize(self.matrix, "DenseHermitian"))
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def norm(self) -> float:
        return float(np.abs(np.linalg.eigvalsh(self.matrix)).max())

    def __add__(self, other: "DenseHermitian") -> "DenseHermitian":
        return DenseHermitian(self.matrix + _as_matrix(other))

    def __sub__(self, other: "DenseHermitian") -> "DenseHermitian":
        return DenseHermitian(self.matrix - _as_matrix(other))

    def __mul__(self, scalar: float) -> "DenseHermitian":
        return DenseHermitian(self.matrix * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "DenseHermitian":
        return DenseHermitian(-self.matrix)


def _as_matrix(op) -> np.ndarray:
    if isinstance(op, (DenseHermitian, LocalObservable)):
        return op.matrix
    return np.asarray(op, dtype=complex)


@dataclass(frozen=True, eq=False)
class LocalObservable:
    """A Hermitian operator on a finite set of sites around the origin.

    ``support`` lists distinct relative offsets and must contain the zero
    offset; tensor legs of ``matrix`` follow the listed support order.
    """

    support: tuple[tuple[int, ...], ...]
    matrix: np.ndarray
    n: int = 2

    def __post_init__(self):
        support = tuple(tuple(int(c) for c in s) for s in self.support)
        if not support:
            raise ValueError("support must be nonempty")
        dims = {len(s) for s in support}
        if len(dims) != 1:
            raise ValueError("support offsets must share one lattice dimension")
        if len(set(support)) != len(support):
            raise ValueError("support offsets must be distinct")
        origin = (0,) * len(support[0])
        if origin not in support:
            raise ValueError("support must contain the origin")
        matrix = _hermitize(self.matrix, "LocalObservable")
        expected = self.n ** len(support)
        if matrix.shape[0] != expected:
            raise ValueError(
                f"matrix dimension {matrix.shape[0]} != n^|support| = {expected}"
            )
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", matrix)
        self.matrix.setflags(write=False)

    @property
    def lattice_dimension(self) -> int:
        return len(self.support[0])

    @property
    def n_sites(self) -> int:
        return len(self.support)

    @property
    def norm(self) -> float:
        return float(np.abs(np.linalg.eigvalsh(self.matrix)).max())

    @property
    def diameter(self) -> int:
        return max(
            abs(a - b)
            for s in zip(*self.support)
            for a in s
            for b in s
        ) if len(self.support) > 1 else 0

    def is_diagonal(self, tol: float = 1e-12) -> bool:
        off = self.matrix - np.diag(np.diag(self.matrix))
        return bool(np.abs(off).max() <= tol) if off.size else True


def one_site(matrix: np.ndarray, dimension: int = 1) -> LocalObservable:
    """Wrap a single-site Hermitian matrix as a LocalObservable."""
    matrix = np.asarray(matrix, dtype=complex)
    return LocalObservable(((0,) * dimension,), matrix, n=matrix.shape[0])


def pauli_observable(word: str, coeff: float = 1.0) -> LocalObservable:
    """Build ``coeff * s_1 x s_2 x ...`` on consecutive 1-d chain sites.

    ``word`` is a string over ``ixyz``; letter k acts on relative site k.
    """
    word = word.lower()
    if not word or any(c not in PAULI for c in word):
        raise ValueError(f"invalid Pauli word {word!r}")
    matrix = np.array([[complex(coeff)]])
    for letter in word:
        matrix = np.kron(matrix, PAULI[letter])
    support = tuple((k,) for k in range(len(word)))
    return LocalObservable(support, matrix, n=2)


@dataclass(frozen=True)
class Interaction:
    """A translation-invariant finite-range potential: one term per support shape."""

    terms: tuple[LocalObservable, ...] = field(default_factory=tuple)
    n: int = 2

    def __post_init__(self):
        terms = tuple(self.terms)
        for t in terms:
            if t.n != self.n:
                raise ValueError("interaction terms must share the single-site dimension")
        object.__setattr__(self, "terms", terms)

    @property
    def max_range(self) -> int:
        return max((t.diameter for t in self.terms), default=0)

    def is_one_site(self) -> bool:
        return all(t.n_sites == 1 for t in self.terms)


def _check_cap(n: int, n_sites: int, dim_cap: int | None) -> int:
    cap = DENSE_DIM_CAP if dim_cap is None else int(dim_cap)
    dim = n ** n_sites
    if dim > cap:
        raise DimensionCapExceeded(
            f"dense dimension {n}^{n_sites} = {dim} exceeds cap {cap}"
        )
    return dim


def _scatter_add(
    out: np.ndarray,
    matrix: np.ndarray,
    positions: list[int],
    total: int,
    n: int,
) -> None:
    """Add a k-site operator (identity elsewhere) into a full dense matrix.

    Only the n^(total+k) nonzero entries are touched: rows and columns
    agree on every site outside ``positions``, so the operator scatters
    as one block per rest-site configuration.  Sites are weighted
    row-major (site 0 most significant), matching the lexicographic
    volume indexing; matrix legs follow the order of ``positions``.
    """
    k = len(positions)
    weights_p = n ** (total - 1 - np.asarray(positions, dtype=np.int64))
    digits = np.stack(
        np.unravel_index(np.arange(n ** k), (n,) * k), axis=1
    ).astype(np.int64)
    p_off = digits @ weights_p
    rest = [t for t in range(total) if t not in positions]
    if rest:
        weights_q = n ** (total - 1 - np.asarray(rest, dtype=np.int64))
        q_digits = np.stack(
            np.unravel_index(np.arange(n ** len(rest)), (n,) * len(rest)), axis=1
        ).astype(np.int64)
        q_off = q_digits @ weights_q
    else:
        q_off = np.zeros(1, dtype=np.int64)
    rows = q_off[:, None, None] + p_off[None, :, None]
    cols = q_off[:, None, None] + p_off[None, None, :]
    out[rows, cols] += matrix[None, :, :]


def _place_tensor(matrix: np.ndarray, positions: list[int], total: int, n: int) -> np.ndarray:
    """Dense matrix of a k-site operator at the given site positions."""
    out = np.zeros((n ** total, n ** total), dtype=complex)
    _scatter_add(out, matrix, positions, total, n)
    return out


def embed(
    obs: LocalObservable,
    offset: tuple[int, ...],
    vol: Volume,
    dim_cap: int | None = None,
) -> DenseHermitian:
    """Place a local observable at a lattice offset inside the volume.

    The translated support must fit inside the box (open boundaries).
    """
    offset = tuple(int(c) for c in offset)
    if len(offset) != vol.dimension or obs.lattice_dimension != vol.dimension:
        raise ValueError("offset/observable dimension does not match the volume")
    _check_cap(obs.n, vol.n_sites, dim_cap)
    translated = [tuple(o + d for o, d in zip(s, offset)) for s in obs.support]
    for site in translated:
        if not vol.contains(site):
            raise SupportOutOfVolume(
                f"translated support site {site} outside volume {vol.extents}"
            )
    positions = [vol.site_index(s) for s in translated]
    return DenseHermitian(_place_tensor(obs.matrix, positions, vol.n_sites, obs.n))


def admissible_offsets(obs: LocalObservable, vol: Volume) -> list[tuple[int, ...]]:
    """All lattice offsets whose translated support fits inside the volume."""
    ranges = []
    for axis in range(vol.dimension):
        coords = [s[axis] for s in obs.support]
        lo, hi = -min(coords), vol.extents[axis] - 1 - max(coords)
        if hi < lo:
            return []
        ranges.append(range(lo, hi + 1))
    return list(itertools.product(*ranges))


def empirical_average(
    obs: LocalObservable, vol: Volume, dim_cap: int | None = None
) -> DenseHermitian:
    """Sum of all translates fitting in the volume, divided by the site count."""
    offsets = admissible_offsets(obs, vol)
    if not offsets:
        raise NoAdmissibleTranslate(
            f"no translate of support {obs.support} fits in volume {vol.extents}"
        )
    dim = _check_cap(obs.n, vol.n_sites, dim_cap)
    total = np.zeros((dim, dim), dtype=complex)
    for off in offsets:
        translated = [tuple(o + d for o, d in zip(s, off)) for s in obs.support]
        positions = [vol.site_index(s) for s in translated]
        _scatter_add(total, obs.matrix, positions, vol.n_sites, obs.n)
    return DenseHermitian(total / vol.n_sites)


def build_hamiltonian(
    phi: Interaction, vol: Volume, dim_cap: int | None = None
) -> DenseHermitian:
    """Sum of all interaction-term translates fitting in the volume (open BC)."""
    dim = _check_cap(phi.n, vol.n_sites, dim_cap)
    total = np.zeros((dim, dim), dtype=complex)
    for term in phi.terms:
        for off in admissible_offsets(term, vol):
            translated = [tuple(o + d for o, d in zip(s, off)) for s in term.support]
            positions = [vol.site_index(s) for s in translated]
            _scatter_add(total, term.matrix, positions, vol.n_sites, term.n)
    return DenseHermitian(total)


def local_energy_operator(phi: Interaction) -> LocalObservable:
    """Energy per site: origin-containing translates of each term, each over |A|.

    Assembled on the union of the shifted supports; an empty interaction
    yields the zero observable on the origin.
    """
    dimension = phi.terms[0].lattice_dimension if phi.terms else 1
    origin = (0,) * dimension
    union: list[tuple[int, ...]] = [origin]
    for term in phi.terms:
        for anchor in term.support:
            for s in term.support:
                shifted = tuple(a - b for a, b in zip(s, anchor))
                if shifted not in union:
                    union.append(shifted)
    union_sites = sorted(union)
    dim = phi.n ** len(union_sites)
    total = np.zeros((dim, dim), dtype=complex)
    index = {site: i for i, site in enumerate(union_sites)}
    for term in phi.terms:
        weight = 1.0 / term.n_sites
        for anchor in term.support:
            positions = [
                index[tuple(a - b for a, b in zip(s, anchor))] for s in term.support
            ]
            total += weight * _place_tensor(term.matrix, positions, len(union_sites), phi.n)
    return LocalObservable(tuple(union_sites), total, n=phi.n)


def interaction_norm(phi: Interaction) -> float:
    """Sum over origin-containing translates of the term spectral norms.

    Each term shape passes through the origin once per support site, so a
    term contributes |support| times its norm.
    """
    return float(sum(term.n_sites * term.norm for term in phi.terms))
