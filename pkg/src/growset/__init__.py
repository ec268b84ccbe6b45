"""Corpus-based entity set expansion guided by generated class names.

The engine expands a 3-entity seed set by probing a masked language model
for candidate class names, ranking them against the corpus, and using the
selected positive/negative names to gate an iterative rank-ensemble entity
selection loop.
"""

__version__ = "0.1.0"
