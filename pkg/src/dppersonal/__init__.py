"""Simulation library for private multitask learning and metalearning."""

from dppersonal.learners import FrameworkKind
from dppersonal.privacy import ApproxDpBudget, SensitivityBound, ZcdpBudget

__all__ = ["ApproxDpBudget", "FrameworkKind", "SensitivityBound", "ZcdpBudget"]
__version__ = "0.1.0"
