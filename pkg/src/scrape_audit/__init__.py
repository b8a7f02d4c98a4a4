"""Toolkit for auditing distortion in after-the-fact web scrapes.

Re-fetching pages from logged browsing URLs is cheaper than capturing them
in situ, but the copies drift: content rots, walls go up, bots get blocked.
This package replays delayed fetches against a deterministic web simulator,
scores how far each copy drifted, and tests whether the drift skews topical
category distributions enough to need repair.
"""

from scrape_audit.editdist import backend_name, levenshtein, normalized_distance

__all__ = [
    "backend_name",
    "levenshtein",
    "normalized_distance",
]

__version__ = "0.1.0"
