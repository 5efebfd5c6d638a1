"""meandimlab: marker functions, interval tilings, signal factors, and
width-dimension estimation for shift-rotation systems."""

__version__ = "0.1.0"

from .dynsys import (  # noqa: F401
    GOLDEN_THETA,
    ConfigurationError,
    OrbitWindow,
    SystemSpec,
    WindowExhaustionError,
    bowen_dist,
    dist,
    make_point,
    sample_points,
)
from .marker import (  # noqa: F401
    MarkerSpec,
    compute_M_M1,
    make_marker_spec,
    marker_sequence,
)
from .tiling import IntervalTiling, TilingParams, slice_tiling, tiling_pair  # noqa: F401
from .signal import GammaVariant, SignalParams, phi_map, pi_map  # noqa: F401
from .widim import (  # noqa: F401
    CellSpace,
    mdim_estimate,
    min_multiplicity,
    widim_orbit,
)
from .fibre import build_fmap, fiber_width_chain, verify_fiber_bound  # noqa: F401
from .config import default_config, load_config, resolve, save_config  # noqa: F401
from .pipeline import (  # noqa: F401
    PipelineError,
    run_pipeline,
    run_products,
    write_report,
)
