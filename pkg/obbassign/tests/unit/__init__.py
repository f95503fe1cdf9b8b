"""
Unit tests for obbassign.

Fast per-module tests of individual functions and types.
"""
