"""
Membership inference against a billboard
========================================

The attacker correlates the published vector with a target person's
sample. Without noise the target is exposed almost always. With noise
calibrated to (eps=1, delta=1e-6) the attack is no better than the DP
guarantee permits.
"""

from dppersonal.harness import ExperimentConfig, run_attack

for label, budget in (("no noise", {"rho": "inf"}),
                      ("eps=1", {"epsilon": 1.0, "delta": 1e-6})):
    cfg = ExperimentConfig(problem="mean", framework="billboard", d=10_000, t=20,
                           trials=1000, seed=11, **budget)
    rep, _ = run_attack(cfg)
    line = f"{label:>9}: TPR={rep.tpr:.3f} at FPR={rep.fpr:.3f}"
    if rep.dp_tpr_bound is not None:
        line += f"  (DP allows at most {rep.dp_tpr_bound:.3f})"
    print(line)

# An attacker who only sees the other people's estimates (here from the
# nonprivate learner) sums t - 1 terms instead of d, so the statistic is weaker.
cfg = ExperimentConfig(problem="mean", framework="nonprivate", d=10_000, t=20,
                       trials=1000, seed=11)
rep, _ = run_attack(cfg)
print(f"colluders: TPR={rep.tpr:.3f} at FPR={rep.fpr:.3f}")
