"""

Experiment runners for hardyscope.


This package contains the orchestration layer: certification of a cube family
and its decay conditions, the kernel lemma suite and the H^1 equivalence study.
Each runner takes an ExperimentConfig and returns a Report; the operator and
the family are shared between runners through the object cache.
"""
