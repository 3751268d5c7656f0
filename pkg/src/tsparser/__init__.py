"""Transition-based neural semantic parsing into executable FunQL."""

__version__ = "0.1.0"
