"""Rigid-sphere pouring simulator."""
