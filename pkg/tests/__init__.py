"""Tests for petvm."""
