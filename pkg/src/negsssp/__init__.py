"""Negative-length single-source shortest paths via hop reduction."""

from .base_solvers import (
    NegativeCycle,
    bellman_ford_oracle,
    dijkstra,
    hop_sssp,
    johnson_neutralize,
    reweight,
    validate_potential,
)
from .graph_core import GenSpec, Graph, generate, load_dimacs, preprocess, save_dimacs
from .solver import SolverConfig, neutralize, shortest_paths

__all__ = [
    "GenSpec",
    "Graph",
    "NegativeCycle",
    "SolverConfig",
    "bellman_ford_oracle",
    "dijkstra",
    "generate",
    "hop_sssp",
    "johnson_neutralize",
    "load_dimacs",
    "neutralize",
    "preprocess",
    "reweight",
    "save_dimacs",
    "shortest_paths",
    "validate_potential",
]
