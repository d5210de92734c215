"""Desk-scale imitation-learning pipeline for the graph-attention MAPF
preference policy. Talks to the solver only through its CLI and file
formats."""

__version__ = "0.1.0"
