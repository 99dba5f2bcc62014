"""
AUV Formation Learning

A deterministic simulator for distributed formation learning control of
heterogeneous underwater vehicles: cooperative leader estimation over a
directed graph, decentralized backstepping control with RBF network learning,
and replay of the learned dynamics from constant weights.
"""

__version__ = "0.1.0"

from .config import Config, config
from .logger import Logger, LoggingContext, get_logger

__all__ = ["Config", "config", "Logger", "LoggingContext", "get_logger"]
