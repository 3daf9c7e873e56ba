"""Experiment configuration, orchestration and command line."""
