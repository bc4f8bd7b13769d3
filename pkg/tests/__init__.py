"""Tests for the calrisk package."""
