"""Sparse multi-beam plank synthesis and analysis for conical phased arrays.

The package covers the full design chain for a conical receive array built
from identical vertical planks:

* ``geometry``  -- truncated-cone element placement and steering phases
* ``reference`` -- Taylor-tapered reference plank and -3 dB beam stacking
* ``solver``    -- joint multi-beam sparse placement/excitation recovery
* ``pattern``   -- array factors, 2D patterns and scalar descriptors
* ``assembly``  -- sector assembly, frequency sweeps, element patterns
* ``cli``       -- command-line front end over the library
"""

from .geometry import ConeGeometry, cone_radii, plank_element_positions, steering_phase
from .pattern import (
    BeamMetrics,
    DegeneratePatternError,
    Pattern2D,
    PatternCut,
    array_factor_cut,
    chi_2d,
    chi_cut,
    local_mismatch,
    metrics,
    pattern_2d,
)
from .reference import (
    BeamPlan,
    CoverageInfeasibleError,
    PlankLayout,
    TaperWeights,
    halfpower_width_u,
    reference_pattern,
    stack_beams,
    taylor_taper,
)
from .solver import (
    CandidateLattice,
    DegenerateSolutionError,
    ExcitationSet,
    NumericalRankError,
    SolverConfig,
    SolverDiagnostics,
    SteeringMatrix,
    build_steering_matrix,
    mt_bcs_solve,
    pareto_sweep,
    posterior_mean,
    sparsify,
)
from .assembly import (
    AssembledArray,
    ElementPattern,
    FrequencyPlan,
    SectorConfig,
    assemble_sector,
    evaluate_assembly,
    frequency_sweep,
    load_element_pattern,
)

__version__ = "0.1.0"
