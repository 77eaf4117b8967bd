"""Detect, rewrite, and evaluate biased language in news paragraphs.

The pipeline stages communicate only through files: ``detect`` writes one
assessment record per paragraph, ``debias``/``reassess`` write rewrite
records, ``evaluate`` and ``analyze`` turn those records plus human
annotations into metric reports and aggregate tables. Every stage is
deterministic under the offline mock provider.
"""

__version__ = "0.1.0"
