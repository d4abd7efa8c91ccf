"""Many-Body Quantum Score: exact Ising-ring quench references and a QPU scoring pipeline.

Modules
-------
quench_model
    Protocol instances and the Ising <-> Rydberg parameter map.
freefermion
    Polynomial-time quench correlators from Gaussian fermionic states.
pfaffian
    Pfaffian of complex antisymmetric matrices.
ed
    Dense exact diagonalisation, dephasing and the noisy shot sampler.
surge
    Surge-time detection, linear law and analytic estimate.
records
    Shot record files and CSV/JSON tables.
scoring
    Correlation estimates, readout mitigation, P2 and the score S.
cli
    Command-line pipeline.
"""

__version__ = "0.1.0"

from .errors import (ChannelNotInvertibleError, DetectionError, DivisionGuardError, EstimationError,
                     IntegrationError, PfaffianError, RecordFormatError, RegressionError, ResourceError)
from .pfaffian import pfaffian
from .quench_model import (QuenchSpec, RydbergParams, blockade_radius, induced_field_hatm,
                           ising_to_rydberg, ring_distance)
from .freefermion import (FreeFermionQuench, ModeData, SectorCorrelators, connected_g2, momenta,
                          one_point_sigma_z, string_two_point)
from .records import ShotRecordSet, read_records, write_records
from .scoring import (CorrelationEstimate, ScoreReport, dephasing_fit, estimate_correlators, mbqs_score,
                      p2_score, predicted_score, readout_mitigate)
from .surge import SurgeResult, find_surge_time, numeric_surge, surge_estimate, surge_regression
