"""Utility modules for bksim."""
