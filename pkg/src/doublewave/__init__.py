"""Numerical laboratory for singularity-carrying guided waves.

The package splits into field containers and discrete calculus (fields),
closed-form references (analytic), the polar split and flow extraction
(madelung), propagators (evolve), trajectory transport (guidance), the
singular near-field toolkit (singular), and the scenario/CLI plumbing.
"""

__version__ = "0.1.0"

from .analytic import (
    FreeGaussian,
    HarmonicGround,
    MonopoleSpec,
    PlanePhaseWave,
    boost_event,
    eval_monopole,
    fit_loglog_order,
    fit_power_and_intercept,
    helmholtz_multipole,
    helmholtz_radial,
    residual_oracle,
    vortex_state,
)
from .config import Config, ConfigError, parse_file, parse_string
from .evolve import (
    KGState,
    NumericalDivergenceError,
    SchrodingerPropagator,
    check_cfl,
    kg_energy,
    kg_step,
    kg_taylor_start,
)
from .fields import (
    Boundary,
    FourPotential,
    GridSpec,
    OutOfDomainError,
    ScalarComplexField,
    StencilConfig,
    gradient,
    laplacian,
    dalembertian,
    sample,
)
from .guidance import (
    AnalyticFlow,
    GriddedFlow,
    Trajectory,
    TrajectoryBundle,
    equivariance_test,
    integrate_ensemble,
    integrate_trajectory,
    internal_clock_check,
    no_crossing_violations,
    sample_ensemble,
)
from .madelung import (
    FlowFields,
    PolarFields,
    bilinear_current,
    circulation,
    continuity_residual,
    decompose,
    hj_residual,
    make_circle_loop,
    quantum_potential,
    velocity_fields,
)
from .render import render_field
from .singular import (
    SingularWaveSpec,
    comoving_helmholtz_construct,
    construct_u,
    f_transport_check,
    make_path,
    perrin_diagnostic,
    shell_directions,
    transport_integral_check,
    transport_rate,
    uniform_path,
    weak_guidance_residual,
)
from .snapshots import read_snapshot, write_snapshot
