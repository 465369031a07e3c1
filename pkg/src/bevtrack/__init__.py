"""Multi-camera pedestrian tracking on the ground plane: simulation, BEV maps, association and metrics."""

__version__ = "0.1.0"
