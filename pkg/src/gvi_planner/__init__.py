"""Learning search heuristics from solved and failed attempts with graph value iteration."""

__version__ = "0.1.0"
