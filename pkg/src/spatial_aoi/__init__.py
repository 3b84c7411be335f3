"""Age-of-information optimal random access for spatially distributed nodes."""

__version__ = "0.1.0"

from .channel import AoiVector, Policy, expected_aoi, objective_value, success_probabilities, success_probability
from .errors import ConvergenceError, UsageError
from .simulator import SimConfig, SimResult, baseline_aloha, run, step_slot
from .solvers import (SolverConfig, SolverReport, pareto_point, solve_ews, solve_mm, solve_pf,
                      solve_ta, ta_policy)
from .topology import Topology, load_topology, sample_uniform_disk, save_topology, symmetric_topology
