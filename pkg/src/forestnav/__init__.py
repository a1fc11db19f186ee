"""Deterministic 2D forest-flight simulator with a rotating-LiDAR model and a PPO trainer."""

__version__ = "0.1.0"
