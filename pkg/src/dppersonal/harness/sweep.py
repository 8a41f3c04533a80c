"""Four-framework loss table over a grid of (d, t, rho)."""

from __future__ import annotations

import dataclasses
import math
from typing import Dict, List, Optional, Sequence

import numpy as np

from dppersonal.harness.config import ConfigError, ExperimentConfig
from dppersonal.harness.runner import AggregateReport, run_experiment
from dppersonal.learners import FrameworkKind

SWEEP_FRAMEWORKS = (FrameworkKind.NONPRIVATE, FrameworkKind.ONE_OUT_OF_T,
                    FrameworkKind.JDP, FrameworkKind.BILLBOARD)


@dataclasses.dataclass(frozen=True)
class SlopeFit:
    """OLS slope of mean loss against d, with SE propagated from per-point SEs."""

    framework: str
    slope: float
    se: float
    expected: float

    @property
    def relative_error(self) -> float:
        if self.expected == 0:
            return math.inf if self.slope != 0 else 0.0
        return abs(self.slope - self.expected) / abs(self.expected)

    def consistent_with(self, value: float, z: float = 3.0) -> bool:
        return abs(self.slope - value) <= z * self.se


@dataclasses.dataclass
class SweepResult:
    reports: List[AggregateReport]
    slopes: Dict[tuple, SlopeFit]
    ordering_violations: List[tuple]

    @property
    def ordering_holds(self) -> bool:
        return not self.ordering_violations

    def table(self) -> List[dict]:
        return [r.to_dict() for r in self.reports]


def fit_slope(x: Sequence[float], y: Sequence[float], se: Sequence[float]):
    """Unweighted least squares slope and its standard error given independent y errors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    se = np.asarray(se, dtype=np.float64)
    if x.size < 3 or np.unique(x).size < 3:
        raise ConfigError("a slope fit needs at least 3 distinct points")
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    slope = float(np.dot(xc, y - y.mean()) / sxx)
    slope_se = math.sqrt(float(np.dot(xc * xc, se * se))) / sxx
    return slope, slope_se


def expected_d_slope(framework, t: int, rho: float) -> float:
    """d-derivative of the exact loss law: 1/(2 rho t^2) for the billboard, else 0."""
    if FrameworkKind(framework) is FrameworkKind.BILLBOARD and not math.isinf(rho):
        return 1.0 / (2.0 * rho * t * t)
    return 0.0


def run_separation_sweep(base: ExperimentConfig, d_axis: Sequence[int],
                         t_axis: Optional[Sequence[int]] = None,
                         rho_axis: Optional[Sequence[float]] = None,
                         frameworks=SWEEP_FRAMEWORKS, parallelism: int = 1,
                         sink=None) -> SweepResult:
    """Runs every framework at every grid point of the mean problem.

    At each (t, rho) the loss is regressed on d. The ordering
    nonprivate <= 1-out-of-t <= JDP <= billboard is checked at every
    point using the measured means, allowing 3 standard errors of slack.

    ``sink``, if given, receives ``(resolved_config, TrialRecord)`` pairs.

    Raises:
      ConfigError: fewer than 3 values of d, or a non-mean base problem.
    """
    if base.problem != "mean":
        raise ConfigError("the separation sweep runs the mean problem")
    if len(set(d_axis)) < 3:
        raise ConfigError("the d axis needs at least 3 distinct values")
    t_axis = list(t_axis) if t_axis else [base.t]
    if rho_axis:
        rho_axis = list(rho_axis)
    elif base.rho is not None:
        rho_axis = [base.rho]
    elif base.epsilon is not None:
        rho_axis = [base.resolved().rho]
    else:
        raise ConfigError("the sweep needs a privacy budget")

    reports, slopes, violations = [], {}, []
    for t in t_axis:
        for rho in rho_axis:
            by_fw = {fw: [] for fw in frameworks}
            for d in d_axis:
                point = []
                for fw in frameworks:
                    cfg = base.replace(framework=fw.value, d=int(d), t=int(t), rho=float(rho),
                                       epsilon=None, sweep=None)
                    point_sink = None
                    if sink is not None:
                        resolved = cfg.resolved()
                        point_sink = lambda rec, c=resolved: sink((c, rec))
                    rep = run_experiment(cfg, parallelism=parallelism,
                                         keep_records=False, sink=point_sink).report
                    reports.append(rep)
                    by_fw[fw].append(rep)
                    point.append((fw.value, rep))
                for k in range(len(point) - 1):
                    (fa, ra), (fb, rb) = point[k], point[k + 1]
                    if ra.mean > rb.mean + 3 * math.hypot(ra.se, rb.se):
                        violations.append((int(d), int(t), float(rho), fa, fb, ra.mean, rb.mean))
            for fw, reps in by_fw.items():
                slope, se = fit_slope([r.d for r in reps], [r.mean for r in reps],
                                      [r.se for r in reps])
                slopes[(fw.value, int(t), float(rho))] = SlopeFit(
                    fw.value, slope, se, expected_d_slope(fw, t, rho))
    return SweepResult(reports, slopes, violations)
