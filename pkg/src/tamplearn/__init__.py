"""Learning symbolic operators from transition data to guide bilevel planning."""

__version__ = "0.1.0"
