"""
DDI Toolkit Test Suite
"""
