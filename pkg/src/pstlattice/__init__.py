"""Design and simulation of perfect-state-transfer waveguide lattices."""

__version__ = "0.1.0"

from .correlations import (
    CorrelationMatrix,
    PhaseAveragingPlan,
    TwoParticleInput,
    classical_emulated_correlation,
    classical_intensity,
    correlation_closed_form,
    two_particle_correlation,
)
from .exceptions import (
    DataQualityError,
    EigensolverError,
    GapCollisionError,
    LatticeError,
    NonUnitaryError,
    NumericalError,
    RevivalError,
)
from .fabrication import (
    CouplingModel,
    GeometrySpec,
    coupling_from_distance,
    design_geometry,
    distance_from_coupling,
    fit_coupling_model,
    realize_couplings,
)
from .imperfections import (
    DisorderConfig,
    ErrorBudget,
    ScenarioConfig,
    apply_position_noise,
    augment_with_dummies,
    gaussian_input_state,
    monte_carlo_fidelity,
    scenario_fidelity,
)
from .lattice import (
    CouplingMatrix,
    LatticeSpec,
    SpectralDecomposition,
    analytic_eigenvalues,
    analytic_eigenvector,
    build_coupling_matrix,
    jacobi_at_zero,
    jx_couplings,
    numeric_eigendecomposition,
)
from .propagation import (
    FidelityReport,
    Propagator,
    fidelity_site1,
    optimum_transfer_scan,
    photon_density,
    propagator,
    revival_signature,
    transfer_fidelity_edge,
)
