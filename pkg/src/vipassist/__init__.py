"""Virtual inverted pendulum co-performance lab.

Simulation, digital-twin pilots, RL/DL assistants, crash-probability gating,
batch experiments, and a live session server.
"""

__version__ = "0.1.0"
