"""Closed-form bounds, log-space arithmetic and the non-uniqueness criterium."""
