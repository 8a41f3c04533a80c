"""Verification suite: fingerprinting statements and privacy accounting checks."""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, List

from dppersonal import attacks, learners, privacy
from dppersonal.learners import FrameworkKind

ROUND_TRIP_EPSILONS = (0.1, 0.5, 1.0, 2.0)
ROUND_TRIP_DELTAS = (1e-3, 1e-6)
RENYI_ALPHAS = (1.5, 2.0, 5.0, 10.0)


@dataclasses.dataclass(frozen=True)
class PrivacyCheck:
    name: str
    value: float
    target: float
    passed: bool

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class LemmaSuiteResult:
    fingerprints: List[attacks.FingerprintReport]
    privacy: List[PrivacyCheck]

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.fingerprints) and all(c.passed for c in self.privacy)

    def failures(self) -> list:
        return ([r for r in self.fingerprints if not r.passed]
                + [c for c in self.privacy if not c.passed])

    def to_dict(self) -> dict:
        return {"ok": self.ok,
                "fingerprints": [r.to_dict() for r in self.fingerprints],
                "privacy": [c.to_dict() for c in self.privacy]}


def learner_noise_configs(ds=(1, 10, 1000), ts=(2, 20, 50), rhos=(0.01, 1.0, 4.0)):
    """(label, Delta, rho) for every noise-adding learner over a small grid."""
    out = []
    for fw in (FrameworkKind.ONE_OUT_OF_T, FrameworkKind.JDP, FrameworkKind.BILLBOARD):
        for d in ds:
            for t in ts:
                for rho in rhos:
                    out.append((f"{fw.value}/d={d}/t={t}/rho={rho}",
                                learners.sensitivity(fw, d, t), rho))
    return out


def privacy_checks(rel_tol: float = 1e-12) -> List[PrivacyCheck]:
    checks = []
    for eps in ROUND_TRIP_EPSILONS:
        for delta in ROUND_TRIP_DELTAS:
            rho = privacy.approx_dp_to_zcdp(eps, delta)
            back = privacy.zcdp_to_approx_dp(rho, delta).epsilon
            checks.append(PrivacyCheck(f"round_trip/eps={eps}/delta={delta}", back, eps,
                                       back <= eps))
    for label, sens, rho in learner_noise_configs():
        sigma = privacy.gaussian_sigma(sens, rho)
        for alpha in RENYI_ALPHAS:
            div = privacy.gaussian_renyi_divergence(sens, sigma, alpha)
            target = rho * alpha
            checks.append(PrivacyCheck(f"renyi/{label}/alpha={alpha}", div, target,
                                       math.isclose(div, target, rel_tol=rel_tol, abs_tol=0.0)))
    return checks


def run_lemma_suite(weight: Callable = attacks.r_weight) -> LemmaSuiteResult:
    """Runs the fingerprint battery and the privacy accounting checks.

    ``weight`` replaces the reweighting function of the identity; passing a
    corrupted one must make the suite fail.
    """
    return LemmaSuiteResult(attacks.run_fingerprint_battery(weight=weight), privacy_checks())
