"""
From a billboard to a metalearner
=================================

A billboard learner publishes one private vector. A new person who was
not among the t training people can personalize it just as well (up to
the e^eps factor), because the vector hardly depends on any single
training person.
"""

import math

from dppersonal.harness import ExperimentConfig, run_experiment

for clip in (False, True):
    cfg = ExperimentConfig(problem="meta_mean", framework="billboard", d=500, t=50,
                           epsilon=1.0, delta=1e-6, trials=2000, seed=3, clip=clip)
    rep = run_experiment(cfg, keep_records=False).report
    limit = math.exp(rep.epsilon) * rep.reference_mean + rep.delta
    label = "clipped" if clip else "raw"
    print(f"{label:>8}: rho={rep.rho:.5f}  unseen-task loss={rep.mean:.4f}  "
          f"training-task loss={rep.reference_mean:.4f}  e^eps*that+delta={limit:.4f}")

# Unclipped estimates carry noise of variance 2d/(rho t^2), far above 1 at
# this budget, so their squared loss exceeds 1. Clipping to [-1, 1] keeps
# the loss bounded without touching the published vector.
