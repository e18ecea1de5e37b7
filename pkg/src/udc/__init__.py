"""udc: uncertainty-aware text classification with human triage.

A small convolutional text classifier trained with a combined
cross-entropy + metric-learning loss, stochastic-dropout uncertainty
scoring (histogram-entropy pipeline plus three baselines), selective
prediction under expert-deferral ratios, and an HTTP triage service for
routing the most uncertain predictions to human reviewers.
"""

__version__ = "0.1.0"
