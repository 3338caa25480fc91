"""Settings, logging and seeded random streams."""
