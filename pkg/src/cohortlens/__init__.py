"""Learner-analytics engine: events -> activity metrics -> cluster exploration -> targeted campaigns."""

__version__ = "0.1.0"
