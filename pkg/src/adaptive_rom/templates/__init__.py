"""Experiment templates for adaptive-rom."""
