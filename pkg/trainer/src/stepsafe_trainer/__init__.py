"""Edge-guided reconstruction trainer for stepsafe datasets."""

__version__ = "0.1.0"
