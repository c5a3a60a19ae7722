"""Bundled scenario configurations and renewable traces."""
