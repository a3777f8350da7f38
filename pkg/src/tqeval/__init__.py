"""Threshold query evaluation engine."""
