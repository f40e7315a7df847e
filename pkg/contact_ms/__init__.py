"""
contact-ms

Spectral stability analysis of the linearized two-phase Mullins-Sekerka
flow for an interface that meets the container walls at a right angle.

Quick Start:
    ```python
    from contact_ms import ModelParams, classify, find_threshold

    p = ModelParams(l=1.0, omega1=-1.0, omega2=-1.0)
    classify(p).verdict            # Verdict.NORMALLY_STABLE
    find_threshold(p, "omega_plus")  # ~ 2.0
    ```

Command Line:
    ```bash
    contact-ms spectrum --l 1 --omega1 -1 --omega2 -1
    python -m contact_ms sweep --vary kappa:0:3.3:12 --omega 0 --l 1
    ```
"""

__version__ = "1.0.0"
__author__ = "Contact MS Contributors"

from .config import (
    EquilibriaConfig,
    EvolveConfig,
    GridConfig,
    OracleConfig,
    RunConfig,
    SweepConfig,
    ThresholdConfig,
    load_config_file,
)
from .dtn import (
    NotMeanFree,
    SolverFailure,
    apply_dtn,
    apply_ntd,
    assemble_ntd_matrix,
    dtn_symbol,
    fd_dtn_oracle,
)
from .evolution import (
    DegenerateTrajectory,
    Trajectory,
    evolve_linear,
    fit_decay_rate,
    monitor_invariants,
)
from .forms import (
    EpsTooLarge,
    curved_bracket_limit,
    gbar_half_form_flat,
    min_form_meanfree,
    quadratic_form,
    test_function_gbar,
    trace_constant,
)
from .kernel import (
    DegenerateDenominator,
    check_semisimple,
    kernel_curved,
    kernel_flat,
    semisimple_integral,
)
from .model import (
    AnalyzerError,
    ConfigurationError,
    EigensolverFailure,
    GeometricConstraintViolated,
    Grid1D,
    GridSpec,
    HeightField,
    ModelParams,
    NonPositiveLength,
    mean,
    validate_params,
)
from .spectrum import (
    Eigenpair,
    NoSignChange,
    StabilityVerdict,
    Verdict,
    assemble_operator,
    classify,
    find_threshold,
    leading_eigenvalues,
    sweep,
)

# The equilibria module needs scipy.integrate; it loads on first access.
_EQUILIBRIA_NAMES = (
    "Wall",
    "Arc",
    "ChannelGeometry",
    "Manifold",
    "NoAdmissibleArc",
    "NotAGraph",
    "IStarNotPositive",
    "NewtonDivergence",
    "orthogonal_arc",
    "equilibrium_residual",
    "newton_trace_manifold",
)


def __getattr__(name: str):
    """Lazy-load the equilibrium-family names on first access."""
    if name in _EQUILIBRIA_NAMES:
        from . import equilibria

        value = getattr(equilibria, name)
        globals()[name] = value
        return value
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    # Version
    "__version__",
    # Config
    "RunConfig",
    "GridConfig",
    "ThresholdConfig",
    "SweepConfig",
    "EvolveConfig",
    "OracleConfig",
    "EquilibriaConfig",
    "load_config_file",
    # Model
    "ModelParams",
    "Grid1D",
    "GridSpec",
    "HeightField",
    "mean",
    "validate_params",
    # DtN
    "dtn_symbol",
    "apply_ntd",
    "apply_dtn",
    "assemble_ntd_matrix",
    "fd_dtn_oracle",
    # Forms
    "quadratic_form",
    "test_function_gbar",
    "gbar_half_form_flat",
    "curved_bracket_limit",
    "min_form_meanfree",
    "trace_constant",
    # Kernel
    "kernel_flat",
    "kernel_curved",
    "semisimple_integral",
    "check_semisimple",
    # Spectrum
    "Verdict",
    "Eigenpair",
    "StabilityVerdict",
    "assemble_operator",
    "leading_eigenvalues",
    "classify",
    "find_threshold",
    "sweep",
    # Evolution
    "Trajectory",
    "evolve_linear",
    "fit_decay_rate",
    "monitor_invariants",
    # Errors
    "AnalyzerError",
    "ConfigurationError",
    "GeometricConstraintViolated",
    "NonPositiveLength",
    "EigensolverFailure",
    "NotMeanFree",
    "SolverFailure",
    "EpsTooLarge",
    "DegenerateDenominator",
    "NoSignChange",
    "DegenerateTrajectory",
    # Equilibria (lazy-loaded)
    *_EQUILIBRIA_NAMES,
]
