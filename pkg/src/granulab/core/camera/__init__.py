"""Depth camera rendering, observation noise and depth-image I/O."""
