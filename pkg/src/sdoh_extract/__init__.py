"""Extraction of social determinants of health (SDoH) from clinical text.

Stage one tags concepts and attributes with a BIO token classifier; stage two
links attributes to the concepts they modify.
"""

__version__ = "0.1.0"
