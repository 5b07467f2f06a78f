from ._version import __version__, __version_info__  # noqa
from .bounds import BoundConstants, theorem_foliated_bound  # noqa
from .cone import (  # noqa
    ConeGraph,
    NullLocalization,
    cone_graph,
    localize_null_cone,
    null_injectivity_radius,
)
from .config import LightconeConfig, RunConfig, Tolerances  # noqa
from .convexity import build_synchronous_chart, convexity_check  # noqa
from .exceptions import (  # noqa
    BoundError,
    ChartError,
    FrameError,
    NonFiniteError,
    ParseError,
    SpecError,
    ThreadException,
)
from .frames import (  # noqa
    AssumptionBounds,
    Observer,
    complete_frame,
    connection_gap,
    measure_bounds,
    observer,
    reference_metric_at,
)
from .geodesic import (  # noqa
    GeodesicSolution,
    exp_map,
    integrate_geodesic,
    parallel_transport,
    radial_norm_profile,
    transport_frame,
)
from .jacobi import (  # noqa
    conjugate_radius,
    exp_jacobian,
    first_conjugate,
    integrate_jacobi,
    null_conjugate_radius,
    sandwich_check,
)
from .radius import (  # noqa
    RadiusReport,
    chart_radius,
    detect_short_loops,
    injectivity_radius,
    theorem_main_bound,
)
from .reports import ReportBundle  # noqa
from .spacetime import (  # noqa
    MetricSpec,
    builtin,
    christoffel_at,
    metric_at,
    parse_metric_spec,
    probe_points,
    riemann_at,
)
from .volume import (  # noqa
    ConeSpec,
    ball_exp_volume,
    comparison_ratio_curve,
    corollary_volume_bound,
    future_cone_volume,
    model_volume,
)
