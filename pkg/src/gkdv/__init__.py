"""Pseudospectral toolkit for the generalized KdV equation with fractional nonlinearity."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlowupError,
    ConfigError,
    ConstraintError,
    ContaminationError,
    GenerationError,
    GKdVError,
    NonContractionError,
    PrecisionError,
)
from .spectral import Field, SpectralGrid, airy_propagate, make_grid, spectral_derivative  # noqa: E402
from .reference import TravelingWaveSpec, cazenave_naumkin_data, m_of_alpha, traveling_wave  # noqa: E402
from .dynamics import ModelParams, Trajectory, simulate, step_etdrk4, step_strang  # noqa: E402
from .diagnostics import (  # noqa: E402
    admissibility_check,
    invariants,
    kato_smoothing_norm,
    operator_identity_residual,
    persistence_monitor,
)
from .picard import contraction_time, duhamel_apply, picard_solve, xt_norm  # noqa: E402
from .regularity import (  # noqa: E402
    CutoffFamily,
    FrontParams,
    local_smoothing_integral,
    make_cutoff,
    one_sided_data,
    regularity_experiment,
    windowed_energy,
)
from .config import RunConfig, parse_config  # noqa: E402
