"""
Test suite for the AAM package.
"""
