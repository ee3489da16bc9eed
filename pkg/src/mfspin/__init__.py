"""Mean-field free energies of quantum lattice spin systems.

Two independent routes to the same number: the per-site log-partition
function of a local Hamiltonian plus an extensive polynomial of
empirical averages, computed from finite volumes, and the variational
value sup (g - I) built from the tilted pressure and its
Legendre-Fenchel transform.
"""

from .errors import (
    ConvergenceFailure,
    DifferentClassicalPolynomial,
    DimensionCapExceeded,
    DimensionMismatch,
    GeneratorSetUnsupported,
    InsufficientSamples,
    IoError,
    MfspinError,
    NoAdmissibleTranslate,
    NonOneSiteObservable,
    NonSymmetricPolynomial,
    NotPermutationInvariant,
    ParseError,
    SupportOutOfVolume,
    ValidationError,
)
from .lattice import (
    DENSE_DIM_CAP,
    PAULI,
    DenseHermitian,
    Interaction,
    LocalObservable,
    Volume,
    build_hamiltonian,
    embed,
    empirical_average,
    interaction_norm,
    local_energy_operator,
    one_site,
    pauli_observable,
)
from .ncpoly import (
    NcPolynomial,
    Rectangle,
    commutator_bound,
    evaluate_classical,
    is_symmetric,
    lipschitz_constants,
    quantization_gap,
    quantize,
    symmetrize,
)
from .spectral import (
    DensityMatrix,
    SectorModel,
    Spectrum,
    eigh,
    expectation,
    gibbs_state,
    k_family_limit,
    k_family_value,
    log_trace_exp,
    sector_decompose,
    sector_log_trace_exp,
    von_neumann_entropy,
)
from .thermo import (
    FiniteVolumePressure,
    PressureSurface,
    RateFunction,
    extrapolate_pressure,
    finite_volume_pressure,
    involution_check,
    legendre_transform,
    pressure_gradient,
    pressure_surface,
    synthetic_pressure_surface,
)
from .varprinciple import (
    TrialState,
    VariationalResult,
    block_lower_bound,
    boundary_perturbation_check,
    mean_field_log_partition,
    product_state_solve,
    sector_mean_field_value,
    solve_rate_form,
    tilted_block_state,
)

__version__ = "0.1.0"
