"""Payload sensitivity of an EMLA-driven heavy-duty manipulator."""

__version__ = "0.1.0"
