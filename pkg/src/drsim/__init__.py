"""Deterministic multi-cluster disaster-recovery simulator with an LSTM-driven failover scheduler."""

__version__ = "0.1.0"
