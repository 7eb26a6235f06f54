"""
Console UI helpers.
"""
