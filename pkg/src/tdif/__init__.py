"""Topic-focused dynamic information filtering over document streams."""

__version__ = "0.1.0"
