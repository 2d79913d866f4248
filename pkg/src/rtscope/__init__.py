"""Batch toolkit for retweet-network disinformation analysis.

Reconstructs a weighted retweet graph from line-delimited tweet records,
partitions it into communities, and quantifies how content from unreliable
sources moves through it: per-user untrustworthiness, per-URL cross-community
diffusion entropy, bot-score joins, null-model significance tests, and
conditional success-probability curves.
"""

__version__ = "0.1.0"
