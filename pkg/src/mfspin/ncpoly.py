"""Word polynomials in two letters and their operator quantizations.

A polynomial g(x, y) is represented by a coefficient map on words over
the alphabet ``xy`` (the empty word is the constant term).  Substituting
operators for the letters gives a quantization; a symmetric coefficient
map (coefficient of a word conjugate to that of its reversal) yields a
Hermitian operator.  Different quantizations of the same g differ by
operator rearrangements whose norm is controlled by the commutator of
the empirical averages, hence shrinks like 1/|vol|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DifferentClassicalPolynomial,
    DimensionMismatch,
    NonSymmetricPolynomial,
)
from .lattice import (
    DenseHermitian,
    LocalObservable,
    Volume,
    _as_matrix,
    empirical_average,
    spectral_norm,
)

MAX_DEGREE = 8

CLASSICAL_GRID_POINTS = 17
CLASSICAL_GRID_TOL = 1e-9


def _clean_word(word: str) -> str:
    word = word.lower()
    if any(c not in "xy" for c in word):
        raise ValueError(f"word {word!r} must use letters x and y only")
    return word


@dataclass(frozen=True, eq=False)
class NcPolynomial:
    """Coefficient map from words over ``xy`` to complex scalars."""

    coeffs: dict[str, complex]

    def __post_init__(self):
        cleaned = {}
        for word, coeff in self.coeffs.items():
            word = _clean_word(word)
            if len(word) > MAX_DEGREE:
                raise ValueError(f"word {word!r} exceeds the degree cap {MAX_DEGREE}")
            coeff = complex(coeff)
            if coeff != 0:
                cleaned[word] = cleaned.get(word, 0j) + coeff
        object.__setattr__(self, "coeffs", cleaned)

    @classmethod
    def zero(cls) -> "NcPolynomial":
        return cls({})

    @classmethod
    def from_terms(cls, terms) -> "NcPolynomial":
        poly: dict[str, complex] = {}
        for word, coeff in terms:
            word = _clean_word(word)
            poly[word] = poly.get(word, 0j) + complex(coeff)
        return cls(poly)

    @property
    def degree(self) -> int:
        return max((len(w) for w in self.coeffs), default=0)

    def words(self) -> list[str]:
        return sorted(self.coeffs, key=lambda w: (len(w), w))

    def depends_on_y(self) -> bool:
        return any("y" in w for w in self.coeffs)

    def __sub__(self, other: "NcPolynomial") -> "NcPolynomial":
        diff = dict(self.coeffs)
        for word, coeff in other.coeffs.items():
            diff[word] = diff.get(word, 0j) - coeff
        return NcPolynomial(diff)


@dataclass(frozen=True)
class Rectangle:
    """The product of spectral intervals [-|X|, |X|] x [-|Y|, |Y|]."""

    x_radius: float
    y_radius: float

    def __post_init__(self):
        if self.x_radius < 0 or self.y_radius < 0:
            raise ValueError("radii must be nonnegative")

    @classmethod
    def from_observables(
        cls, X: LocalObservable, Y: LocalObservable | None
    ) -> "Rectangle":
        return cls(X.norm, Y.norm if Y is not None else 0.0)


def evaluate_classical(p: NcPolynomial, x: float, y: float) -> float:
    """Collapse the word polynomial at commuting real arguments."""
    total = 0j
    for word, coeff in p.coeffs.items():
        total += coeff * x ** word.count("x") * y ** word.count("y")
    if abs(total.imag) > 1e-10 * max(1.0, abs(total.real)):
        raise NonSymmetricPolynomial(
            f"classical value has imaginary part {total.imag:.3e}; symmetrize first"
        )
    return float(total.real)


def evaluate_classical_batch(p: NcPolynomial, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x, y = np.asarray(x, float), np.asarray(y, float)
    total = np.zeros(np.broadcast(x, y).shape, dtype=complex)
    for word, coeff in p.coeffs.items():
        total += coeff * x ** word.count("x") * y ** word.count("y")
    if total.size and np.abs(total.imag).max() > 1e-10 * max(1.0, np.abs(total.real).max()):
        raise NonSymmetricPolynomial("classical values are not real; symmetrize first")
    return total.real


def is_symmetric(p: NcPolynomial, tol: float = 1e-12) -> bool:
    """True iff the coefficient of each word is conjugate to that of its reversal."""
    for word, coeff in p.coeffs.items():
        if abs(np.conj(coeff) - p.coeffs.get(word[::-1], 0j)) > tol:
            return False
    return True


def symmetrize(p: NcPolynomial) -> NcPolynomial:
    """Average each coefficient with the conjugate of its reversed word's."""
    out: dict[str, complex] = {}
    words = set(p.coeffs) | {w[::-1] for w in p.coeffs}
    for word in words:
        out[word] = 0.5 * (p.coeffs.get(word, 0j) + np.conj(p.coeffs.get(word[::-1], 0j)))
    return NcPolynomial(out)


def _is_diagonal(matrix: np.ndarray) -> bool:
    off = matrix - np.diag(np.diag(matrix))
    return bool(np.abs(off).max() == 0.0) if off.size else True


def word_operator(p: NcPolynomial, A: np.ndarray, B: np.ndarray | None) -> np.ndarray:
    """Substitute operators for the letters; no symmetry requirement."""
    A = _as_matrix(A)
    B = _as_matrix(B) if B is not None else None
    if B is not None and A.shape != B.shape:
        raise DimensionMismatch(f"operand shapes differ: {A.shape} vs {B.shape}")
    if B is None and p.depends_on_y():
        raise DimensionMismatch("polynomial involves y but no second operator given")
    dim = A.shape[0]
    if _is_diagonal(A) and (B is None or _is_diagonal(B)):
        # commuting diagonal operands: evaluate on the diagonals
        da = np.diag(A)
        db = np.diag(B) if B is not None else np.zeros(dim)
        total_diag = np.zeros(dim, dtype=complex)
        for word, coeff in p.coeffs.items():
            total_diag += coeff * da ** word.count("x") * db ** word.count("y")
        return np.diag(total_diag)
    total = np.zeros((dim, dim), dtype=complex)
    for word, coeff in p.coeffs.items():
        factor = np.eye(dim, dtype=complex)
        for letter in word:
            factor = factor @ (A if letter == "x" else B)
        total += coeff * factor
    return total


def quantize(p: NcPolynomial, A, B=None) -> DenseHermitian:
    """Hermitian operator of a symmetric word polynomial at (A, B)."""
    if not is_symmetric(p):
        raise NonSymmetricPolynomial("quantize requires a symmetric coefficient map")
    matrix = word_operator(p, A, B)
    scale = max(1.0, float(np.abs(matrix).max()) if matrix.size else 1.0)
    asym = float(np.abs(matrix - matrix.conj().T).max()) if matrix.size else 0.0
    if asym > 1e-12 * scale:
        raise NonSymmetricPolynomial(f"quantized operator asymmetry {asym:.3e}")
    return DenseHermitian(matrix)


def commutator_bound(
    X: LocalObservable,
    Y: LocalObservable,
    vol: Volume,
    dim_cap: int | None = None,
) -> tuple[float, float]:
    """Bound and dense value of |[Xbar, Ybar]| on the volume.

    The bound carries the factor 2 from |[A, B]| <= 2 |A| |B| applied to
    each overlapping translate pair (the single-site pair x, z already
    saturates it).
    """
    bound = (
        2.0 / vol.n_sites * X.norm * X.n_sites * Y.norm * Y.n_sites
    )
    xbar = empirical_average(X, vol, dim_cap).matrix
    ybar = empirical_average(Y, vol, dim_cap).matrix
    comm = xbar @ ybar - ybar @ xbar
    # i[A, B] is Hermitian, so the 2-norm is the largest |eigenvalue|
    actual = float(np.abs(np.linalg.eigvalsh(1j * comm)).max())
    return bound, actual


def _inversions(word: str) -> int:
    """Adjacent transpositions needed to sort the word to x...xy...y."""
    count, ys = 0, 0
    for letter in word:
        if letter == "y":
            ys += 1
        else:
            count += ys
    return count


def rearrangement_constant(d: NcPolynomial, X: LocalObservable, Y: LocalObservable) -> float:
    """Constant C with |D(Xbar, Ybar)| <= C / |vol| for a classical-zero map d.

    Every word is sorted to canonical x^a y^b form by adjacent swaps; each
    swap costs at most |X|^(a-1) |Y|^(b-1) times the commutator bound
    constant 2 |X| |supp X| |Y| |supp Y|.  The canonical residue vanishes
    when the classical collapse is exactly zero.
    """
    base = 2.0 * X.norm * X.n_sites * Y.norm * Y.n_sites
    total = 0.0
    for word, coeff in d.coeffs.items():
        a, b = word.count("x"), word.count("y")
        if a == 0 or b == 0:
            continue
        total += abs(coeff) * _inversions(word) * X.norm ** (a - 1) * Y.norm ** (b - 1)
    return total * base


def _canonical_residue(d: NcPolynomial, X: LocalObservable, Y: LocalObservable) -> float:
    """Norm bound of the fully sorted residue (nonzero only for inexact inputs)."""
    sums: dict[tuple[int, int], complex] = {}
    for word, coeff in d.coeffs.items():
        key = (word.count("x"), word.count("y"))
        sums[key] = sums.get(key, 0j) + coeff
    return float(
        sum(abs(c) * X.norm ** a * Y.norm ** b for (a, b), c in sums.items())
    )


def classical_agreement(
    p1: NcPolynomial,
    p2: NcPolynomial,
    rect: Rectangle,
    points: int = CLASSICAL_GRID_POINTS,
    tol: float = CLASSICAL_GRID_TOL,
) -> bool:
    """Grid test that both maps collapse to the same classical polynomial."""
    xs = np.linspace(-rect.x_radius, rect.x_radius, points)
    ys = np.linspace(-rect.y_radius, rect.y_radius, points) if rect.y_radius else np.zeros(1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    diff = p1 - p2
    vals = np.zeros(gx.shape, dtype=complex)
    for word, coeff in diff.coeffs.items():
        vals += coeff * gx ** word.count("x") * gy ** word.count("y")
    return bool(np.abs(vals).max() <= tol) if vals.size else True


def quantization_gap(
    p1: NcPolynomial,
    p2: NcPolynomial,
    X: LocalObservable,
    Y: LocalObservable,
    vol: Volume,
    dim_cap: int | None = None,
) -> tuple[float, float]:
    """Dense gap |G1(Xbar, Ybar) - G2(Xbar, Ybar)| and its rearrangement bound.

    Accepts any two coefficient maps with the same classical collapse
    (symmetry is not required; the difference of two quantizations of one
    polynomial is a pure rearrangement either way).
    """
    rect = Rectangle.from_observables(X, Y)
    if not classical_agreement(p1, p2, rect):
        raise DifferentClassicalPolynomial(
            "coefficient maps collapse to different classical polynomials"
        )
    xbar = empirical_average(X, vol, dim_cap).matrix
    ybar = empirical_average(Y, vol, dim_cap).matrix
    diff = word_operator(p1 - p2, xbar, ybar)
    gap = spectral_norm(diff)
    d = p1 - p2
    bound = rearrangement_constant(d, X, Y) / vol.n_sites + _canonical_residue(d, X, Y)
    return gap, bound


def lipschitz_constants(p: NcPolynomial, rect: Rectangle) -> tuple[float, float]:
    """Conservative per-coordinate Lipschitz constants on the rectangle.

    Coefficient sums of the formal partial derivatives, evaluated at the
    box radii.
    """
    lx = ly = 0.0
    rx, ry = max(rect.x_radius, 0.0), max(rect.y_radius, 0.0)
    for word, coeff in p.coeffs.items():
        a, b = word.count("x"), word.count("y")
        if a:
            lx += abs(coeff) * a * rx ** (a - 1) * ry ** b
        if b:
            ly += abs(coeff) * b * rx ** a * ry ** (b - 1)
    return lx, ly
