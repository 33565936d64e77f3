"""Public-comment mining for city-council meetings: transcripts to labeled concerns."""

__version__ = "0.1.0"
