"""Quantify syntactic dialect variation across a construction grammar network.

The pipeline ingests geo-referenced documents, assembles lexically-balanced
samples, matches construction patterns against them, trains linear dialect
classifiers at several spatial granularities, and measures how predictive
power and dialect similarity distribute over the grammar's cluster structure.
"""

__version__ = "0.1.0"
