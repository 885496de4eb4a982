"""
Citation nearest neighbour ensembles for multi-instance learning.

Bags of feature vectors are classified by an ensemble of Citation Nearest
Neighbour (CNN) classifiers whose parameters come from an NSGA-II search,
combined by a stacked kernel classifier.
"""

__version__ = "1.0.0"
