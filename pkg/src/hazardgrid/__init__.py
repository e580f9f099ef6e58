"""Seedable flood-escape grid world with tabular double Q-learning."""
from hazardgrid.flood import FloodKind, FloodModel, FloodParams
from hazardgrid.grid import Density, GridMap, generate_map, load_map, parse_map, shortest_path
from hazardgrid.learn import LearnerConfig, QTablePair

__all__ = [
    "Density",
    "FloodKind",
    "FloodModel",
    "FloodParams",
    "GridMap",
    "LearnerConfig",
    "QTablePair",
    "generate_map",
    "load_map",
    "parse_map",
    "shortest_path",
]
__version__ = "0.1.0"
