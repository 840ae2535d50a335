"""cyclonet: topology reconstruction for networks of linear dynamical agents
driven by cyclostationary noise, from nodal time series alone."""

from .errors import (CyclonetError, InputError, InstabilityError,
                     NumericalError, SingularityError, StructureError)
from .evaluate import EvalMetrics, evaluate_topology
from .fullobs import (LearnerConfig, PhaseProfile, TopologyResult,
                      moral_graph, phase_profile, prune_spurious,
                      reconstruct_topology)
from .graphs import (AssumptionReport, DirectedGenerativeGraph, TopologyGraph,
                     check_assumptions, connected_components, degree,
                     hop_distance, is_cut_pair, moralize, sep, topology_of)
from .latent import (LatentResult, build_gc, insert_hidden_nodes,
                     learn_observed_topology, reconstruct_latent)
from .netsim import (ContinuousModelSpec, FilterSpec, InputSpec, NetworkSpec,
                     gen_input, lifted_transfer_block, simulate, tustin,
                     validate_well_posed)
from .series import (LiftedSeries, ScalarSeries, detect_period, lcm_periods,
                     lift, unlift)
from .spectral import (OracleComponents, SpectralGrid, estimate_block_psd,
                       exact_inverse_psd, exact_latent_components,
                       exact_observed_inverse_psd, exact_psd, invert_psd,
                       welch_cross_psd)

__version__ = "0.1.0"
