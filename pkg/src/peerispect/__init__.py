"""Peerispect: verify peer-review claims against the submitted manuscript."""

__version__ = "0.1.0"
