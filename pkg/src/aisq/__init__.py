"""aisq: AIS trajectory ingestion, feature pipeline, and ship-type classification."""

__version__ = "0.1.0"
