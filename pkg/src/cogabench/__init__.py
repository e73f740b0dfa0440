"""Desk-scale GUI task workbench: environments, affordance providers, a
masked double-DQN agent, and a benchmark harness tying them together."""

__version__ = "0.1.0"
