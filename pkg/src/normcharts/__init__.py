"""Radiology-report triage and normative brain growth-chart toolkit.

Two pipelines share this package. The first turns free-text radiology
reports into Normal/Abnormal labels three ways: keyword pre-labeling plus
human grade aggregation, a hashed n-gram linear classifier with weighted
loss for the heavy class imbalance, and yes/no LLM inquiry protocols with a
fixed aggregation rule. The second fits generalized-gamma normative models
of regional brain volumes against age, sex, and scanner, and scores
individual sessions as centiles.
"""

__version__ = "0.1.0"
