"""Learning-based testing of a platooning plant with recurrent behaviour models."""

__version__ = "0.1.0"
