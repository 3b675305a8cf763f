"""Sparse moment-SOS relaxations for polynomial optimization."""
