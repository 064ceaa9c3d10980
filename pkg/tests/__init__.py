"""Tests for the foveal-iqa package."""
