"""Hermitian functional calculus, Gibbs states, entropy, and fast paths.

All matrix functions go through full eigendecomposition: the workload is
Hermitian-only and that route gives the best accuracy for Gibbs weights
and entropies.  Permutation-invariant two-level models additionally get
a collective-spin sector decomposition so site counts in the hundreds
stay cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, log

import numpy as np

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    GeneratorSetUnsupported,
    NotPermutationInvariant,
)
from .lattice import PAULI, _as_matrix
from .ncpoly import NcPolynomial, word_operator

ENTROPY_CLIP = -1e-12


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigendecomposition with ascending eigenvalues."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian positive matrix of unit trace."""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        if np.abs(matrix - matrix.conj().T).max() > 1e-12 * max(1.0, np.abs(matrix).max()):
            raise ValueError("density matrix must be Hermitian")
        matrix = 0.5 * (matrix + matrix.conj().T)
        evals = np.linalg.eigvalsh(matrix)
        if evals.min() < ENTROPY_CLIP:
            raise ValueError(f"density matrix has eigenvalue {evals.min():.3e} < 0")
        tr = float(matrix.trace().real)
        if abs(tr - 1.0) > 1e-12:
            raise ValueError(f"density matrix trace {tr} != 1")
        object.__setattr__(self, "matrix", matrix)
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def eigh(A) -> Spectrum:
    """Full eigendecomposition, validated for reconstruction and unitarity."""
    matrix = _as_matrix(A)
    try:
        evals, evecs = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"eigh failed: {exc}") from exc
    scale = max(1.0, float(np.abs(evals).max()) if evals.size else 1.0)
    recon = (evecs * evals) @ evecs.conj().T
    if np.abs(recon - matrix).max() > 1e-10 * scale:
        raise ConvergenceFailure("eigendecomposition does not reconstruct the input")
    gram = evecs.conj().T @ evecs
    if np.abs(gram - np.eye(len(evals))).max() > 1e-10:
        raise ConvergenceFailure("eigenvector matrix is not unitary")
    return Spectrum(evals, evecs)


def eigvals_hermitian(A) -> np.ndarray:
    """Ascending eigenvalues; diagonal matrices bypass the dense solver."""
    matrix = _as_matrix(A)
    diag = np.diag(matrix)
    if np.abs(matrix - np.diag(diag)).max() == 0.0:
        return np.sort(diag.real)
    return np.linalg.eigvalsh(matrix)


def log_trace_exp(A) -> float:
    """Shift-stabilized log Tr exp of a Hermitian matrix."""
    evals = eigvals_hermitian(A)
    top = float(evals[-1])
    return top + float(np.log(np.exp(evals - top).sum()))


def gibbs_state(A) -> DensityMatrix:
    """Normalized exp(A) through the spectrum of A."""
    spec = eigh(A)
    weights = np.exp(spec.eigenvalues - spec.eigenvalues.max())
    weights /= weights.sum()
    return DensityMatrix((spec.eigenvectors * weights) @ spec.eigenvectors.conj().T)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-Tr rho log rho with 0 log 0 = 0; tiny negative weights are clipped."""
    probs = np.linalg.eigvalsh(rho.matrix)
    probs = np.clip(probs, 0.0, None)
    probs = probs[probs > 0.0]
    return float(-(probs * np.log(probs)).sum())


def expectation(rho: DensityMatrix, A) -> float:
    """Re Tr(rho A); the imaginary residue must be negligible."""
    matrix = _as_matrix(A)
    if matrix.shape != rho.matrix.shape:
        raise DimensionMismatch(
            f"state dim {rho.matrix.shape[0]} != observable dim {matrix.shape[0]}"
        )
    val = complex(np.einsum("ij,ji->", rho.matrix, matrix))
    scale = max(1.0, float(np.abs(matrix).max()))
    if abs(val.imag) > 1e-10 * scale:
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def _expm_hermitian(A: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(A)
    return (U * np.exp(w)) @ U.conj().T


def k_family_value(H, Gop, K: int, volume_size: int) -> float:
    """Finite-K interpolation between state expectation and joint exponential.

    Computes (1/N) log Tr (e^{-H/K} e^{G/K})^K - (1/N) log Tr e^{-H};
    subtracting the K-independent normalization makes the commuting case
    exactly K-independent.  Exponents are shifted for overflow safety;
    the value is shift-invariant.
    """
    if K < 1:
        raise ValueError("K must be a positive integer")
    Hm, Gm = _as_matrix(H), _as_matrix(Gop)
    if Hm.shape != Gm.shape:
        raise DimensionMismatch(f"shapes differ: {Hm.shape} vs {Gm.shape}")
    h_shift = float(np.linalg.eigvalsh(Hm).min())
    g_shift = float(np.linalg.eigvalsh(Gm).max())
    step = _expm_hermitian(-(Hm - h_shift * np.eye(len(Hm))) / K) @ _expm_hermitian(
        (Gm - g_shift * np.eye(len(Gm))) / K
    )
    tr = np.trace(np.linalg.matrix_power(step, K))
    if abs(tr.imag) > 1e-9 * max(1.0, abs(tr.real)):
        raise ValueError(f"trace has imaginary residue {tr.imag:.3e}")
    log_power = float(np.log(tr.real)) + g_shift - h_shift
    log_z = log_trace_exp(-Hm)
    return (log_power - log_z) / volume_size


def k_family_limit(H, Gop, volume_size: int) -> float:
    """K -> infinity member of the family: a single joint exponential."""
    Hm, Gm = _as_matrix(H), _as_matrix(Gop)
    if Hm.shape != Gm.shape:
        raise DimensionMismatch(f"shapes differ: {Hm.shape} vs {Gm.shape}")
    return (log_trace_exp(-Hm + Gm) - log_trace_exp(-Hm)) / volume_size


@dataclass(frozen=True, eq=False)
class SpinSector:
    """One total-spin block: spin s = twice_s / 2 with its multiplicity."""

    twice_s: int
    multiplicity: int
    log_multiplicity: float
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray


@dataclass(frozen=True, eq=False)
class SectorModel:
    """Collective-spin block structure of N permutation-symmetric qubits."""

    n_sites: int
    sectors: tuple[SpinSector, ...]


def _spin_matrices(twice_s: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s = twice_s / 2.0
    m = s - np.arange(twice_s + 1)
    sz = np.diag(m).astype(complex)
    raise_amp = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    sp = np.zeros((twice_s + 1, twice_s + 1), dtype=complex)
    sp[np.arange(twice_s), np.arange(1, twice_s + 1)] = raise_amp
    sm = sp.conj().T
    return 0.5 * (sp + sm), -0.5j * (sp - sm), sz


def sector_decompose(n_sites: int) -> SectorModel:
    """Spin sectors s = N/2, N/2-1, ... with Catalan-triangle multiplicities."""
    if n_sites < 1:
        raise ValueError("n_sites must be positive")
    sectors = []
    for twice_s in range(n_sites % 2, n_sites + 1, 2):
        k = (n_sites - twice_s) // 2
        mult = comb(n_sites, k) - (comb(n_sites, k - 1) if k >= 1 else 0)
        if mult <= 0:
            continue
        sx, sy, sz = _spin_matrices(twice_s)
        sectors.append(SpinSector(twice_s, mult, log(mult), sx, sy, sz))
    return SectorModel(n_sites, tuple(sectors))


def pauli_components(matrix: np.ndarray) -> tuple[float, np.ndarray]:
    """Decompose a 2x2 Hermitian matrix as a*1 + b . sigma."""
    matrix = _as_matrix(matrix)
    if matrix.shape != (2, 2):
        raise GeneratorSetUnsupported("collective-spin path needs 2x2 site operators")
    a = float(matrix.trace().real) / 2.0
    b = np.array(
        [float((matrix @ PAULI[ax]).trace().real) / 2.0 for ax in "xyz"]
    )
    return a, b


def _collective(sector: SpinSector, scalar: float, b: np.ndarray, scale: float) -> np.ndarray:
    """scalar*1 + scale * b . (2 S) on one sector (sigma = 2 S per site)."""
    dim = sector.twice_s + 1
    return scalar * np.eye(dim, dtype=complex) + 2.0 * scale * (
        b[0] * sector.sx + b[1] * sector.sy + b[2] * sector.sz
    )


def sector_log_trace_exp(
    model: SectorModel,
    field: np.ndarray | None,
    x_site: np.ndarray,
    y_site: np.ndarray | None = None,
    g: NcPolynomial | None = None,
) -> float:
    """Per-site log-trace of exp(-H + N G(Xbar, Ybar)) via spin sectors.

    ``field`` is the summed one-site interaction term (H is its translate
    sum), ``x_site``/``y_site`` the one-site observables entering the
    empirical averages, ``g`` the polynomial of the averages.
    """
    n = model.n_sites
    ax, bx = pauli_components(x_site)
    if y_site is not None:
        ay, by = pauli_components(y_site)
    if field is not None:
        ah, bh = pauli_components(field)
    log_terms = []
    for sector in model.sectors:
        dim = sector.twice_s + 1
        exponent = np.zeros((dim, dim), dtype=complex)
        if field is not None:
            exponent -= _collective(sector, n * ah, bh, 1.0)
        if g is not None and g.coeffs:
            xbar = _collective(sector, ax, bx, 1.0 / n)
            ybar = _collective(sector, ay, by, 1.0 / n) if y_site is not None else None
            exponent += n * word_operator(g, xbar, ybar)
        evals = np.linalg.eigvalsh(0.5 * (exponent + exponent.conj().T))
        log_terms.append(sector.log_multiplicity + evals)
    flat = np.concatenate(log_terms)
    top = flat.max()
    return float(top + np.log(np.exp(flat - top).sum())) / n


def check_permutation_invariant(terms_supports: list[int]) -> None:
    if any(k != 1 for k in terms_supports):
        raise NotPermutationInvariant(
            "collective-spin fast path requires one-site terms only"
        )
