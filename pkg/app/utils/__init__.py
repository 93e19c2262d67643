"""Logging and seed helpers."""
