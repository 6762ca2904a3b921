"""Kinematic trip mining for GPS trajectory logs.

Parses Geolife-format trajectory archives into modality-labeled trips,
derives per-trip kinematic features (speed and acceleration statistics),
and runs two experiments on top of them: user-wise trip classification
with a decision tree, and detection of injected foreign trips with the
Local Outlier Factor.
"""

__version__ = "0.1.0"
