"""
dxpath - knowledge-graph path retrieval and neural path ranking for
diagnosis prediction from clinical notes.
"""

__version__ = "0.4.0"
