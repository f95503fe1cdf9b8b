"""
Test fixtures and shared test data for obbassign.
"""
