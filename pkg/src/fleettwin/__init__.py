"""Deterministic multi-robot fleet simulator with a digital-twin hub.

Heterogeneous simulated platforms coordinate through a bidirectional frame
protocol under a cooperation / collaboration / corroboration governance
model, including an autonomous battery-replacement mission that measurably
reduces a stranded platform's downtime.
"""

__version__ = "0.1.0"
