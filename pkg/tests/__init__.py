"""Unit tests for bellgames."""
