"""Differentiable multi-channel Lenia plus goal-directed discovery tooling."""

from .autodiff import GradientBundle, LossSpec, backward, forward_loss
from .engine import (BatchTrajectory, NumericalBlowupError, Trajectory,
                     rollout, rollout_batch, step)
from .geometry import (EmptyPatternError, ScaleTooSmallError, center_of_mass,
                       disk_score, goal_score, make_target, rescale)
from .grids import GridState, empty_state, load_snapshot, save_snapshot
from .growth import growth, obstacle_growth
from .kernels import DegenerateKernelError, build_kernel, compile_rules
from .obstacles import ObstacleConfig, training_obstacles, uniform_obstacles
from .params import (InitPattern, Rule, RuleSet, load_params, obstacle_rule,
                     sample_init, sample_ruleset, save_params)
from .perturb import PerturbationSpec

__version__ = "0.1.0"

__all__ = [
    "BatchTrajectory", "DegenerateKernelError", "EmptyPatternError",
    "GradientBundle", "GridState", "InitPattern", "LossSpec",
    "NumericalBlowupError", "ObstacleConfig", "PerturbationSpec", "Rule",
    "RuleSet", "ScaleTooSmallError", "Trajectory", "backward",
    "build_kernel", "center_of_mass", "compile_rules", "disk_score",
    "empty_state", "forward_loss", "goal_score", "growth", "load_params",
    "load_snapshot", "make_target", "obstacle_growth", "obstacle_rule",
    "rescale", "rollout", "rollout_batch", "sample_init", "sample_ruleset",
    "save_params", "save_snapshot", "step",
]
