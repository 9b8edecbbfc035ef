"""Desk-scale RL toolkit: fused-primitive policy networks, guided rewards,
a deterministic planar pushing/sliding simulator, and a benchmark harness."""

__version__ = "0.1.0"
