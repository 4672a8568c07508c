"""Utilities and helpers for the :mod:`granulab.core.data` module."""
