from .schema import (
    GhostError, ConfigError, NumericalGuard, AnalysisError,
    SourceParams, Geometry, ComplexWidth, PathDetector, CoincidencePattern, DualityReport,
    validate_gram, effective_diffusion,
)
from .analytic import (
    epr_position_space, uncertainties, conditional_packets, post_slit_state,
    coincidence_density, ghost_pattern, detector_pattern,
)
from .duality import distinguishability, visibility_bound, analytic_v2, check_duality, two_slit_check, sample_gram

__version__ = "0.1.0"
