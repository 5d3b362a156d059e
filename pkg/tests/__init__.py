"""Tests for primeab."""
