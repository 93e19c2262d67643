"""Run history database."""
