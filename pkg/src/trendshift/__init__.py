"""Streaming hashtag recommendation that detects trend shifts and realigns its model."""

__version__ = "0.1.0"
