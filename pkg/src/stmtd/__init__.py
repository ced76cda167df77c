"""Spatial-temporal moving target defense as a Markov Stackelberg game.

The defender's problem is an average-cost semi-Markov decision process
whose per-state improvement step is a Stackelberg (bilevel) program
against a population of attacker types. This package builds instances,
solves them by value iteration, and provides baselines and a simulator.
"""

from ._kernels import BACKEND
from .attacker import best_response, best_response_set, break_ties_for_defender, expected_attack_reward
from .baselines import (
    BaselineSolution,
    solve_baseline,
    solve_bsg_spatial,
    solve_bsg_spatiotemporal,
    solve_urs,
    solve_urs_temporal,
)
from .bilevel import build_subproblem, export_miqp, solve_state
from .io import load_instance, load_policy, save_instance, save_policy, synthetic_instance
from .model import (
    AttackerType,
    AttackerTypeSet,
    AttackTimeModel,
    ConfigurationSpace,
    DefenderPolicy,
    GameInstance,
    InvalidInstanceError,
    expected_overlap,
    validate_instance,
)
from .nvd import InstanceRecipe, VulnRecord, build_instance, parse_cve_records
from .simulator import SimConfig, SimResult, sample_attack_time, simulate
from .smdp import default_gamma, evaluate_policy, stage_cost, transform_action
from .solver import SolveReport, SolverConfig, policy_improvement, relative_value_iteration, span, value_iteration
from .sweep import run_sweep

__version__ = "0.1.0"
