"""File formats and atomic artifact writes."""
