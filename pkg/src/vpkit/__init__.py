"""Speaker anonymization evaluation toolkit: trials, anonymization, metrics, ablations."""

__version__ = "0.1.0"
