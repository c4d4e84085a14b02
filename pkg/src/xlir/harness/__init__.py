"""Experiment orchestration: synthetic data, protocol, pipeline."""
