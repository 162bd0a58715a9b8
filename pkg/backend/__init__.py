"""
Generative-prior compressed sensing toolkit.
"""

__version__ = "1.0.0"
