"""Deterministic headless engine for two-device AR lecture recording.

Subsystems: geometry core, device session protocol, material/AR-map store,
AR slide stage, assistant agent, recording director, and a benchmark harness.
"""

__version__ = "0.1.0"
