"""Test suite for domain-checker package."""
