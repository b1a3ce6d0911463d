"""CURE: cluster-based unsupervised relation extraction.

Pipeline: ingest dependency-parsed sentences, extract the shortest path
between the entity pair on each parse tree, train an encoder-decoder to
predict a held-out path of a pair from its remaining paths, cluster the
learned relation vectors, and label each cluster with relation words.
"""

__version__ = "0.1.0"

from .errors import CureError, NumericError, ValidationError

__all__ = ["CureError", "NumericError", "ValidationError", "__version__"]
