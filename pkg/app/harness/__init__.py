"""Experiment harness: presets, runs, sweeps, archives and the oracle suite."""
