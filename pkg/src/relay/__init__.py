"""relay: translate multi-component training data as single sequences.

Data points are concatenated behind an indicator token and an optional
catalyst statement, shipped through a translation backend, resegmented, and
audited for reversibility and quality against per-component translation.
"""

__version__ = "0.1.0"
