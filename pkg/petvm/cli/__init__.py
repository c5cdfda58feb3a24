"""Command line interface for petvm."""
