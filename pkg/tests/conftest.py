"""Shared pytest setup; keeps the tests directory importable for oracles.py."""
