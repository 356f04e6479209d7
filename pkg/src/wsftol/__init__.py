"""Wired spanning forests on spherically symmetric trees: insertion and deletion tolerance."""

__version__ = "0.1.0"
