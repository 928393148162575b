"""Distributed 1:N fingerprint identification.

A master node turns a fingerprint database into comparison tasks, workers
extract minutiae features and score similarities, and the master aggregates
the per-record scores into a best-match answer per query.
"""

__version__ = "0.1.0"
