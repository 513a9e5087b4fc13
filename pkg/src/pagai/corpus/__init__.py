"""Bundled benchmark programs."""
