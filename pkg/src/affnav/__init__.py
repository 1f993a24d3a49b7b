"""Zero-shot affordance-based navigation in a synthetic continuous environment."""

__version__ = "0.1.0"
