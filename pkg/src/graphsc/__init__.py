"""Simulator for adversarial online learning with feedback graphs and switching costs."""

from .adversaries import LossTable, make_adversary
from .engine import GameConfig, GameTrace, expected_regret, monte_carlo, run_game
from .graphs import FeedbackGraph, GraphSequence, generate_graph
from .learners import make_policy
from .measures import independence_number, independence_sequence, mas_size, measure_report

__all__ = [
    "FeedbackGraph", "GraphSequence", "generate_graph",
    "independence_number", "mas_size", "independence_sequence", "measure_report",
    "LossTable", "make_adversary", "make_policy",
    "GameConfig", "GameTrace", "run_game", "monte_carlo", "expected_regret",
]
__version__ = "0.1.0"
