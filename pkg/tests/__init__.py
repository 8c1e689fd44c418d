"""Test suite for twochan."""
