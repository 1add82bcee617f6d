"""Entropy, metric mean dimension and rate-distortion estimates for finite dynamical data."""

__version__ = "0.1.0"

from .errors import BudgetExceeded, ConfigError, ConvergenceWarning, MdimError, PrecisionRefusal
from .dynsys import (DynSystem, FiniteMeasure, ProductMeasure, average_distance, bowen_distance,
                     make_product_measure, make_shift_system, orbit, sample_space)
from .covercount import (AVERAGE, BOWEN, BallKind, CountCurve, CountEntry, cylinder_cover_exact,
                         exact_max_separated, exact_measure_cover, greedy_measure_cover,
                         greedy_separated, prime, shift_cover_upper)
from .estimators import (EpsLadder, EstimateReport, box_dimension, entropy_curve, growth_rate,
                         katok_entropy, mdim_estimate, measure_mdim)
from .infotheory import (ApproximationMap, JointDistribution, RDCurve, RDPoint, blahut_arimoto,
                         block_rate_distortion, lloyd_codebook, mutual_information, orbit_code,
                         sandwich_check, shannon_entropy)
from .constructions import (BlockSpec, PiecewiseAffineMap, build_max_mdim_map, predicted_mdim,
                            symbolic_separated_count)
