"""scatterlab: characteristic evolution and scattering audits for a
defocusing cubic wave equation on the Schwarzschild exterior."""

from .analysis import (
    ConvergenceReport,
    DecayFit,
    InequalityRow,
    convergence_study,
    fit_energy_decay,
    fit_loglog,
    fit_pointwise_decay,
    inequality_audit,
    sobolev_ratio,
)
from .background import (
    BlackHoleParams,
    ConvergenceError,
    DomainError,
    LambdaProfile,
    lambda_eval,
    metric_F,
    null_coords,
    r_of_rstar,
    rstar_of_r,
    tilde_v,
)
from .energy import (
    EnergyBreakdown,
    STPieces,
    audit_energy,
    closure_residual,
    energy_S_T,
    energy_original_field,
    flux_sigma_t,
    flux_tilted,
    flux_u_line,
    flux_v_line,
    norm_H,
    norm_Hplus,
    quartic_free_energy,
)
from .evolve import (
    EvolutionError,
    MaskError,
    diamond_backward,
    diamond_forward,
    evolve_forward,
    evolve_goursat,
    extract_radiation,
    extract_slice,
    init_band_from_cauchy,
    restrict_to_cauchy,
)
from .fields import (
    BoundaryData,
    CauchyData,
    CornerCompatibilityError,
    GaussianPulse,
    GridError,
    GridField,
    ModeSpec,
    NullGrid,
    SupportError,
    make_flat_grid,
    make_grid,
    sample_gaussian,
)
from .scattering import (
    PastBoundaryData,
    ScatteringReport,
    build_scattering_report,
    inverse_trace,
    lipschitz_probe,
    lipschitz_sweep,
    roundtrip_residual,
    scattering_map,
    trace_backward,
    trace_forward,
)

__version__ = "0.1.0"
