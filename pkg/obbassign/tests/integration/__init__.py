"""
Integration tests for obbassign.

Multi-module pipelines and brute-force oracle comparisons.
"""
