"""Early risk detection harness.

A corpus of user post histories is replayed round by round through a mock
evaluation server; a participant client scores each user's recent posts with
a pluggable classifier, turns the probability stream into an alarm decision
with a historic rule, and the finished run is scored with classification and
latency metrics (ERDE, latency-weighted F1).
"""

__version__ = "0.1.0"
