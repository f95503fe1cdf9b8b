"""
Tests for the obbassign package.
"""
