"""Radial sigma_2-curvature toolkit: symmetric-function algebra, 1-d
discretization, conformal energies, the normalized descent flow, and the
glued comparison-metric construction, with a CLI (`sigma2`) on top.

Numerics run on numpy; the flow's hot kernel optionally JIT-compiles with
numba (set SIGMA2_NUMBA=0 to force the pure-numpy path).
"""

from ._accel import USE_NUMBA, backend_name
from .discretize import (
    DerivativeOperator,
    RadialGrid,
    ball_radius,
    d1,
    d2,
    derivative,
    gauss_panels,
    integrate,
    log_edges,
    sphere_latitude,
    sphere_measure,
)
from .symfun import (
    dsigma2,
    elementary_symmetric,
    garding_pairing,
    in_gamma_k_plus,
    maclaurin_lower_bound,
    newton_transform,
    sigma_k,
    sigma_k_minors,
    sigma2_stable,
)
from .geometry import (
    ConeViolation,
    ConformalField,
    CurvatureModel,
    FlatRadialBall,
    RoundSphere,
    SchoutenFields,
    divergence_identity_residual,
    functional_F2,
    functional_F2_tilde_eps,
    functional_V,
    functional_V_eps,
    normalized_F2,
    round_schouten_sigma2,
    schouten_conformal,
    schouten_fields,
    schouten_pointwise,
    sigma2_metric,
    sigma_pair_radial,
    smoothstep,
    sobolev_quotient,
)
from .flow import (
    FlowConfig,
    FlowResult,
    FlowState,
    MonitorRecord,
    MONITOR_COLUMNS,
    ContinuationRung,
    EigenResult,
    continuation,
    eigen_solve,
    flow_run,
    flow_state,
    gauge_h,
    gauge_h_prime,
    h_eval,
    h_prime,
    initial_field,
    local_estimate_monitor,
    normalizers,
    run,
    step,
    velocity,
    write_monitor_csv,
)
from .testmetric import (
    AssembledMetric,
    BubbleParams,
    ConstructionError,
    GluingProfile,
    Lemma5Report,
    MarginSweep,
    SphereConstants,
    TracePair,
    TransitionProfile,
    assemble_and_compare,
    bernoulli_alpha,
    bernoulli_residual,
    glue_lemma6,
    lemma4_traces,
    lemma5_integrals,
    margin_sweep,
    sphere_constants,
    transition_lemma7,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
