"""Pydantic models and frozen numeric containers."""
