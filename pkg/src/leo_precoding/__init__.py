"""System-level simulator for location-based precoding from a single LEO satellite."""

__version__ = "0.1.0"
