"""
Geometry helpers and sample data
"""
