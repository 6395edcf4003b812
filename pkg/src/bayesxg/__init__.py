"""Expected-goals models with position and player effects."""

__version__ = "0.1.0"
