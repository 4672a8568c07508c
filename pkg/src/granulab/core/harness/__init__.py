"""Reproducible experiments built on the simulator, camera, features and inference."""
