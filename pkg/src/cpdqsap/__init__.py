"""Quadratic penalty solver for computational protein design posed as a QSAP."""
from .instance import (Assignment, CpdFormatError, Instance, InstanceError, Violation,
                       generate_random, load_instance, parse_instance, parse_json,
                       serialize, serialize_json, validate)
from .model import (QsapModel, SupportSet, block_gradient, build_model, embed, feasibility,
                    gradient, objective, objective_exact, support)
from .oracle import OracleResult, SearchSpaceTooLarge, brute_force, enumerate_objectives
from .penalty import (PenaltyParams, SolveReport, check_termination, penalty_gradient,
                      penalty_objective, solve, solve_subproblem)
from .rounding import RoundingMode, round_point, round_report

__version__ = "0.1.0"
