"""Gradual information-flow control: typing, elaboration, and interval-refining monitors."""

__version__ = "0.1.0"
