"""Knowledge-enhanced cross-document relation extraction at desk scale."""

__version__ = "0.1.0"
