"""Service-order optimisation for a UAV base station serving ground and aerial users."""

from .channel import link_budget, user_rate
from .harness import ExperimentConfig, ResultRow, Sweep, run_experiment
from .learning import (LearnParams, QTable, extract_greedy_trajectory, random_policy, train_double_q,
                       train_q_learning)
from .mdp import RewardMode, TrajectoryEnv
from .scenario import (ChannelParams, Scenario, ScenarioDistribution, UavConfig, UserKind, UserProfile,
                       generate_scenario, load_scenario, save_scenario)
from .schedule import brute_force_optimum, evaluate_order

__version__ = "0.1.0"
