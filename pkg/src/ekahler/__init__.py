"""Numerical laboratory for degenerate homogeneous structures of linear type.

The package builds the explicit epsilon-Kaehler plane-wave model metrics and
checks the tensor identities, dynamics and Lie-algebraic claims made about
them.  Heavy inner loops run through numba when it is available; set
``EKAHLER_DISABLE_NUMBA=1`` to use the pure-numpy kernels instead.
"""

from types import ModuleType as _ModuleType

from ._accel import backend_name
from .chart_calculus import (
    AlgebraicCurvature,
    Chart,
    LocalGeometry,
    christoffel_at,
    cov_deriv,
    metric_at,
    ricci_scalar_at,
    riemann_at,
)
from .dynamics import (
    completeness_probe,
    integrate_geodesic,
    parallel_transport,
    tidal_experiment,
)
from .epsilon_algebra import EpsilonComplex, QuatSignature, quat_triple_check, standard_triple
from .errors import (
    DegenerateMetricError,
    DomainError,
    EKahlerError,
    FitUndefinedError,
    InvalidInputError,
    PreconditionError,
    ResourceError,
)
from .homogeneous_verify import (
    as_residuals,
    curvature_form_fit,
    infinitesimal_holonomy,
    quat_decompose,
    sp_kernel_dim,
)
from .lie_models import (
    StructureConstants,
    build_infinitesimal_model,
    center,
    jacobi_residual,
    paper_algebra,
    series_analysis,
)
from .linear_models import ModelSpec, build_chart, structure_for

__version__ = "0.1.0"

__all__ = [name for name, obj in list(globals().items()) if not name.startswith("_") and not isinstance(obj, _ModuleType)]
