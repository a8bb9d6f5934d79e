"""Short-packet throughput and queue stability for two-source relay networks."""
from .errors import DomainError, NumericalError, UnstableError
from .fbl_model import (ChannelParams, CodeSpec, PcModel, chi, error_prob, log_success_prob,
                        make_channel, q_function, success_prob)
from .netsim import (Classification, SimConfig, SimReport, adjudicate_baf, analytic_boundary,
                     boundary_scan, classify_stability, estimate_pi0, run_sim)
from .qapprox import (LinearApproxParams, QuadApproxParams, fit_constants, linear_opt_k,
                      quad_opt_k)
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario
from .stability import (TrafficProfile, baf_stable, cc_stable, cognitive_split,
                        geo_geo1_stationary, relay_rates, tdma_stable)
from .throughput import (Binding, LinkSet, Protocol, RelayArm, ThroughputResult,
                         baf_relay_throughput, baf_source_throughput, cc_throughput,
                         nc_throughput, optimize_k, optimize_protocol, tdma_throughput)

__version__ = "0.1.0"
