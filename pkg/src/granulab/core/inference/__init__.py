"""Likelihood-free inference of material parameters from summary statistics."""
