"""Scenario-based verification of reach-avoid probabilities for linear systems.

The package computes probabilistically guaranteed lower bounds on the
chance that a discrete-time linear system with additive noise, driven by
an open-loop input sequence, stays inside a safe polytope and ends inside
a target polytope. The pipeline: draw enough noise scenarios to meet a
confidence target, cluster them to a tractable reduced set with sound
constraint buffers, maximize the satisfied fraction with a mixed-integer
program, then certify the resulting input sequence against the full
scenario set.
"""

__version__ = "0.1.0"
