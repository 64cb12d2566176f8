"""bellgames - correlation boxes, Bell inequalities and games played through them."""

__version__ = "0.1.0"

from src.corrbox import JointProbBox, stats, validate
from src.fine import bell_values, fine_construct, lp_feasible
from src.gamecore import Game2x2, enumerate_nash, payoff
from src.paperlab import PaperLab
from src.quantum import QuantumSetup, born_box
from src.report_formatter import ReportFormatter

__all__ = [
    "Game2x2",
    "JointProbBox",
    "PaperLab",
    "QuantumSetup",
    "ReportFormatter",
    "bell_values",
    "born_box",
    "enumerate_nash",
    "fine_construct",
    "lp_feasible",
    "payoff",
    "stats",
    "validate",
]
