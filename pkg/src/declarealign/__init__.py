"""Optimal alignment of traces against declarative process models."""

from .model import Constraint, Log, Model, Trace, parse_log, parse_model
from .repair import CostFunction, parse_costs

__all__ = ["Constraint", "Log", "Model", "Trace", "CostFunction", "parse_costs", "parse_log", "parse_model"]
