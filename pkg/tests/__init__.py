"""
Test package for augtune.
"""
