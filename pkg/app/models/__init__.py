"""
Domain types and scenario file schema
"""
