"""Perfect samplers for weighted graphlets, subset polymer models and two spin systems."""

__version__ = "0.1.0"
