"""Aggregation, abstraction and control of thermostatically controlled loads."""

__version__ = "0.1.0"

from .params import TclParams, TclState, noise_std, switch
from .chain import (MarkovChainModel, TemperaturePartition, build_chain,
                    build_deterministic_baseline, build_partition)
from .initial import discretize_initial
from .aggregate import AggregateModel, aggregate_step, quadratic_form_identity, sigma_of_X
from .population import (PopulationSnapshot, mc_expected_mode, mc_expected_power,
                         simulate_population, tcl_step)
from .reduction import ReducedModel, eliminate_state, reduce_order
from .heterogeneity import (HeterogeneitySpec, build_averaged_model, build_clustered_model,
                            lipschitz_constant)
from .bounds import (chain_value_functions, clustered_population_bound, compute_bound_params,
                     empirical_abstraction_error, homogeneous_population_bound)
from .control import (FilterState, SmpcProblem, build_switched_family, closed_loop_run,
                      energy_cost_plan, kf_step, one_step_regulate, smpc_cost, smpc_plan)
