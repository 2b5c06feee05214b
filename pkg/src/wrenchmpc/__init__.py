"""Wrench-aware MPC for a legged mobile manipulator: dynamics, wrench generation, planning and simulation."""

__version__ = "0.1.0"
