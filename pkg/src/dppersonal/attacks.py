"""Fingerprinting identities and tracing attacks.

The fingerprinting functionals are evaluated exactly: the expectation over
``x in {-1, +1}^t`` is a finite sum with product weights, which makes the
integrand a polynomial in ``p`` on each side of zero, so a fixed-size
Gauss-Legendre rule on ``[-a, 0]`` and ``[0, a]`` integrates it without
discretization error.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from typing import Callable, Optional

import numpy as np

from dppersonal.learners import MeanLearnerOutput, SignLearnerOutput
from dppersonal.tasks import (
    EstSample,
    MeanInstance,
    draw_hard_mean_instance,
    sample_est_data,
    sample_product,
)

MAX_ENUMERATION_T = 12


class PreconditionError(ValueError):
    """An experiment was configured outside the regime its analysis covers."""


def r_weight(alpha: float, p):
    """(alpha^2 - p^2) / (1 - p^2), or 1 when alpha^2 == 1."""
    p = np.asarray(p, dtype=np.float64)
    if alpha * alpha == 1.0:
        return np.ones_like(p)
    return (alpha * alpha - p * p) / (1.0 - p * p)


def enumerate_cube(t: int) -> np.ndarray:
    """All points of {-1, +1}^t as a (2^t, t) float array."""
    return np.array(list(itertools.product((-1.0, 1.0), repeat=t)))


def _product_weights(X: np.ndarray, p: float) -> np.ndarray:
    return np.prod((1.0 + X * p) / 2.0, axis=1)


def _f_values(f: Callable, X: np.ndarray) -> np.ndarray:
    F = np.asarray(f(X), dtype=np.float64).reshape(-1)
    if F.shape != (X.shape[0],):
        raise ValueError("f must return one value per point of the cube")
    if np.any(np.abs(F) > 1 + 1e-12):
        raise ValueError("f must take values in [-1, 1]")
    return F


def _check_t(t):
    if not (1 <= t <= MAX_ENUMERATION_T):
        raise ValueError(f"t must lie in [1, {MAX_ENUMERATION_T}] for exact enumeration")


def _gauss_legendre(a: float, b: float, n: int):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return half * nodes + 0.5 * (a + b), half * weights


def _uniform_average(integrand: Callable, lo: float, hi: float, n: int) -> float:
    """Mean of ``integrand`` under Uniform[lo, hi], split at 0."""
    total = 0.0
    for a, b in ((lo, min(0.0, hi)), (max(0.0, lo), hi)):
        if b > a:
            nodes, weights = _gauss_legendre(a, b, n)
            total += math.fsum(w * integrand(p) for p, w in zip(nodes, weights))
    return total / (hi - lo)


def fingerprint_lhs_exact(f: Callable, alpha: float, t: int,
                          weight: Callable = r_weight) -> float:
    """E_p E_x[ r(alpha,p) f(x) sum_i (x_i - p) + 2(|p| - f(x) p) ] for p ~ U[-alpha, alpha].

    Args:
      f: Maps a (2^t, t) array of cube points to values in [-1, 1].
      alpha: Half-width of the prior on ``p``; in (0, 1].
      t: Number of samples, at most ``MAX_ENUMERATION_T``.
      weight: The reweighting ``r``; injectable so tests can corrupt it.

    Returns:
      The expectation, which equals ``alpha`` for every ``f``.
    """
    _check_t(t)
    if not (0 < alpha <= 1):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    X = enumerate_cube(t)
    F = _f_values(f, X)
    row_sums = X.sum(axis=1)

    def integrand(p):
        w = _product_weights(X, p)
        corr = np.dot(F * (row_sums - t * p), w)
        g = np.dot(F, w)
        return float(weight(alpha, p)) * corr + 2.0 * (abs(p) - g * p)

    return _uniform_average(integrand, -alpha, alpha, t + 4)


def fingerprint_buv_lhs_exact(f: Callable, t: int) -> float:
    """E_p E_x[ (f(x) - p) sum_i (x_i - p) + (f(x) - p)^2 ] for p ~ U[-1, 1]; at least 1/3."""
    _check_t(t)
    X = enumerate_cube(t)
    F = _f_values(f, X)
    row_sums = X.sum(axis=1)

    def integrand(p):
        w = _product_weights(X, p)
        diff = F - p
        return float(np.dot(diff * (row_sums - t * p) + diff * diff, w))

    return _uniform_average(integrand, -1.0, 1.0, t + 4)


# Test battery of functions {-1,+1}^t -> [-1, 1].
def f_const(c: float) -> Callable:
    return lambda X: np.full(X.shape[0], float(c))


def f_coordinate(k: int = 0) -> Callable:
    return lambda X: X[:, k]


def f_majority(X):
    """Sign of the sum; ties map to 0."""
    return np.sign(X.sum(axis=1))


def f_clipped_mean(scale: float = 2.0) -> Callable:
    return lambda X: np.clip(scale * X.mean(axis=1), -1.0, 1.0)


def fingerprint_battery() -> dict:
    return {
        "const_plus": f_const(1.0),
        "const_minus": f_const(-1.0),
        "const_zero": f_const(0.0),
        "first_coordinate": f_coordinate(0),
        "majority": f_majority,
        "clipped_mean": f_clipped_mean(2.0),
    }


@dataclasses.dataclass(frozen=True)
class FingerprintReport:
    lemma: str
    function: str
    t: int
    alpha: float
    lhs_value: float
    target: float
    abs_error: float
    passed: bool

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def run_fingerprint_battery(ts=(1, 2, 3, 5), alphas=(0.1, 0.5, 1.0),
                            identity_tol=1e-7, buv_tol=1e-8,
                            weight: Callable = r_weight) -> list:
    """Evaluates both fingerprinting statements over the function battery."""
    reports = []
    for name, f in fingerprint_battery().items():
        for t in ts:
            for alpha in alphas:
                lhs = fingerprint_lhs_exact(f, alpha, t, weight=weight)
                err = abs(lhs - alpha)
                reports.append(FingerprintReport(
                    "identity", name, t, alpha, lhs, alpha, err, err <= identity_tol))
            lhs = fingerprint_buv_lhs_exact(f, t)
            reports.append(FingerprintReport(
                "buv", name, t, 1.0, lhs, 1.0 / 3.0, abs(lhs - 1.0 / 3.0),
                lhs >= 1.0 / 3.0 - buv_tol))
    return reports


@dataclasses.dataclass(frozen=True)
class TraceStatistics:
    in_sample: np.ndarray
    resampled: np.ndarray

    def __post_init__(self):
        if self.in_sample.shape != self.resampled.shape:
            raise ValueError("statistic vectors must have equal length")


def _check_person(person, t):
    if not (0 <= person < t):
        raise IndexError(f"person {person} out of range for t={t}")


def _colluder_corr(inst, estimates, person, x):
    others = np.arange(inst.t) != person
    pj = inst.p[inst.j[others]]
    est = np.asarray(estimates, dtype=np.float64)[others]
    xj = np.asarray(x, dtype=np.float64)[inst.j[others]]
    return float(np.dot(est - pj, xj - pj))


def trace_jdp(inst: MeanInstance, out: MeanLearnerOutput, person: int, sample: EstSample,
              resampled_out: MeanLearnerOutput):
    """Correlation of the other people's errors with ``person``'s sample.

    Returns:
      ``(T, T_prime)``; ``T_prime`` uses the outputs of the run in which
      ``person``'s sample was replaced by a fresh draw.
    """
    _check_person(person, inst.t)
    return (_colluder_corr(inst, out.per_person_estimate, person, sample.x),
            _colluder_corr(inst, resampled_out.per_person_estimate, person, sample.x))


def trace_meta(inst: MeanInstance, representation, sample: EstSample) -> float:
    """sum_j (rep_j - p_j)(x_j - p_j) over all coordinates."""
    rep = np.asarray(representation, dtype=np.float64)
    x = np.asarray(sample.x, dtype=np.float64)
    if rep.shape != inst.p.shape or x.shape != inst.p.shape:
        raise ValueError("representation and sample must have dimension d")
    return float(np.dot(rep - inst.p, x - inst.p))


def _sign_weights(inst, lam, idx):
    pj = inst.p[idx]
    if lam * lam != 1.0 and np.any(np.abs(pj) >= 1.0):
        raise ValueError("weights are undefined where |p| = 1 and lam < 1")
    return r_weight(lam, pj)


def _sign_corr(inst, lam, signs, person, x):
    others = np.arange(inst.t) != person
    idx = inst.j[others]
    wts = _sign_weights(inst, lam, idx)
    s = np.asarray(signs, dtype=np.float64)[others]
    xj = np.asarray(x, dtype=np.float64)[idx]
    return float(np.dot(wts * s, xj - inst.p[idx]))


def trace_sign(inst: MeanInstance, signs: SignLearnerOutput, person: int, sample: EstSample,
               resampled_signs: SignLearnerOutput, lam: Optional[float] = None):
    """Reweighted sign-tracing statistics ``(T, T_prime)`` for one sample of ``person``.

    ``lam`` defaults to ``inst.lam``, the half-width of the prior on ``p``.
    """
    lam = inst.lam if lam is None else lam
    if not (0 < lam <= 1):
        raise ValueError(f"lam must lie in (0, 1], got {lam}")
    _check_person(person, inst.t)
    return (_sign_corr(inst, lam, signs.per_person_sign, person, sample.x),
            _sign_corr(inst, lam, resampled_signs.per_person_sign, person, sample.x))


def check_mean_attack_delta(delta: float, t: int):
    """The mean-estimation tracing analysis needs delta < 1/(96 t)."""
    if not (0 < delta < 1.0 / (96 * t)):
        raise PreconditionError(
            f"delta={delta} outside (0, 1/(96 t)) = (0, {1.0 / (96 * t):.3g}) for t={t}")


def check_sign_attack_delta(delta: float, t: int):
    """The sign-estimation tracing analysis needs delta < 1/(2 t)."""
    if not (0 < delta < 1.0 / (2 * t)):
        raise PreconditionError(
            f"delta={delta} outside (0, 1/(2 t)) = (0, {1.0 / (2 * t):.3g}) for t={t}")


@dataclasses.dataclass(frozen=True)
class AttackReport:
    """Outcome of a thresholded membership-inference experiment.

    ``stats_in`` / ``stats_out`` hold the per-trial in-sample and
    resampled statistics; they are excluded from ``to_dict``.
    """

    trials: int
    statistic: str
    threshold: float
    tpr: float
    fpr: float
    tpr_se: float
    fpr_se: float
    mean_in: float
    mean_out: float
    std_out: float
    max_abs_out: float
    epsilon: Optional[float]
    delta: Optional[float]
    stats_in: np.ndarray = dataclasses.field(repr=False, compare=False)
    stats_out: np.ndarray = dataclasses.field(repr=False, compare=False)

    @property
    def dp_tpr_bound(self) -> Optional[float]:
        """e^eps FPR + delta, the most an (eps, delta)-DP release allows."""
        if self.epsilon is None:
            return None
        return math.exp(self.epsilon) * self.fpr + self.delta

    @property
    def dp_bound_se(self) -> float:
        e = math.exp(self.epsilon) if self.epsilon is not None else 1.0
        return math.hypot(self.tpr_se, e * self.fpr_se)

    @property
    def empirical_epsilon(self) -> float:
        """log((TPR - delta) / FPR): the privacy loss the attack witnesses."""
        delta = self.delta or 0.0
        if self.fpr <= 0 or self.tpr - delta <= 0:
            return 0.0 if self.tpr <= self.fpr else math.inf
        return max(0.0, math.log((self.tpr - delta) / self.fpr))

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)
             if f.name not in ("stats_in", "stats_out")}
        d["dp_tpr_bound"] = self.dp_tpr_bound
        d["empirical_epsilon"] = self.empirical_epsilon
        return d

    def statistic_dp_check(self):
        """Compares E[T] with E[T'] + 2 eps sd(T') + 2 delta max|T'|.

        Returns:
          ``(lhs, rhs, se)`` where ``se`` is the Monte Carlo standard error
          of ``lhs - rhs`` from the two sample means.
        """
        n = self.trials
        rhs = self.mean_out + 2 * self.epsilon * self.std_out + 2 * self.delta * self.max_abs_out
        se = math.hypot(np.std(self.stats_in, ddof=1) / math.sqrt(n), self.std_out / math.sqrt(n))
        return self.mean_in, rhs, se


def oracle_learner(inst_holder: dict) -> Callable:
    """A learner that outputs the true means; ``inst_holder['inst']`` is read per call."""
    def learner(data, rng):
        p = inst_holder["inst"].p
        return MeanLearnerOutput(p[data.j].copy(), p.copy())
    return learner


def membership_inference_experiment(learner: Callable, d: int, t: int, trials: int,
                                    seed: int, *, fpr: float = 0.05, lam: float = 1.0,
                                    statistic: str = "auto", epsilon: Optional[float] = None,
                                    delta: Optional[float] = None, coupled: bool = True,
                                    target: int = 0, min_trials: int = 1000,
                                    inst_holder: Optional[dict] = None) -> AttackReport:
    """Thresholded tracing attack against a mean learner on hard instances.

    Each trial draws ``p ~ U[-lam, lam]^d`` and uniform indices, runs
    ``learner`` on one sample per person, then reruns it with the target's
    sample replaced by a fresh draw. Both outputs are scored against the
    target's real sample. The threshold is the ``1 - fpr`` quantile of the
    resampled scores.

    Args:
      learner: ``learner(EstData, rng) -> MeanLearnerOutput``.
      d, t: Problem size; ``t >= 2``.
      trials: Number of trials, at least ``min_trials``.
      seed: Root seed; trial ``k`` uses the stream spawned with key ``(k,)``.
      fpr: Nominal false-positive rate.
      lam: Half-width of the prior on ``p``.
      statistic: ``"full"`` (all coordinates of the billboard),
        ``"colluders"`` (the other people's estimates), or ``"auto"``.
      epsilon, delta: The learner's (eps, delta) guarantee, if private.
        ``delta`` must satisfy the tracing analysis' range.
      coupled: Reuse the learner's noise stream in the resampled run.
      target: The person under attack.
      inst_holder: If given, ``inst_holder['inst']`` is set to each trial's
        instance before the learner runs (used by the oracle learner).
    """
    if t < 2:
        raise PreconditionError("membership inference needs t >= 2")
    if trials < min_trials:
        raise PreconditionError(f"need at least {min_trials} trials, got {trials}")
    if (epsilon is None) != (delta is None):
        raise ValueError("give both epsilon and delta or neither")
    if delta is not None:
        check_mean_attack_delta(delta, t)
    if statistic not in ("auto", "full", "colluders"):
        raise ValueError(f"unknown statistic {statistic!r}")

    stats_in = np.empty(trials)
    stats_out = np.empty(trials)
    used = statistic
    for k in range(trials):
        ss_inst, ss_data, ss_noise, ss_noise2 = np.random.SeedSequence(
            seed, spawn_key=(k,)).spawn(4)
        inst = draw_hard_mean_instance(d, t, lam, np.random.default_rng(ss_inst))
        if inst_holder is not None:
            inst_holder["inst"] = inst
        rng_data = np.random.default_rng(ss_data)
        data = sample_est_data(inst, 1, rng_data)
        fresh = sample_product(inst.p, (1,), rng_data)
        out = learner(data, np.random.default_rng(ss_noise))
        out2 = learner(data.replace(target, fresh),
                       np.random.default_rng(ss_noise if coupled else ss_noise2))
        sample = data.sample(target)
        if used == "auto":
            used = "full" if out.billboard is not None else "colluders"
        if used == "full":
            stats_in[k] = trace_meta(inst, out.billboard, sample)
            stats_out[k] = trace_meta(inst, out2.billboard, sample)
        else:
            stats_in[k], stats_out[k] = trace_jdp(inst, out, target, sample, out2)

    threshold = float(np.quantile(stats_out, 1.0 - fpr))
    tpr = float(np.mean(stats_in > threshold))
    fpr_hat = float(np.mean(stats_out > threshold))
    return AttackReport(
        trials=trials, statistic=used, threshold=threshold, tpr=tpr, fpr=fpr_hat,
        tpr_se=math.sqrt(tpr * (1 - tpr) / trials),
        fpr_se=math.sqrt(fpr_hat * (1 - fpr_hat) / trials),
        mean_in=float(np.mean(stats_in)), mean_out=float(np.mean(stats_out)),
        std_out=float(np.std(stats_out, ddof=1)), max_abs_out=float(np.max(np.abs(stats_out))),
        epsilon=epsilon, delta=delta, stats_in=stats_in, stats_out=stats_out)


@dataclasses.dataclass(frozen=True)
class SignTraceResult:
    """Per-trial sums from ``sign_tracing_experiment`` (duplicate-free trials only).

    ``tracing_sum`` is sum_{i,k} T_{i,k}; ``full_sum`` additionally counts
    each person's correlation with their own samples; ``sign_error`` is
    sum_l 1{wrong sign} |p_{j_l}|; ``resampled_sum`` is sum_{i,k} T'_{i,k}.
    """

    lam: float
    t: int
    tracing_sum: np.ndarray
    full_sum: np.ndarray
    sign_error: np.ndarray
    resampled_sum: np.ndarray


def sign_tracing_experiment(sign_estimator: Callable, d: int, t: int, lam: float,
                            trials: int, seed: int, n: int = 2) -> SignTraceResult:
    """Runs the sign-tracing statistics on hard instances with ``p ~ U[-lam, lam]^d``.

    ``sign_estimator(EstData, rng) -> SignLearnerOutput`` receives ``n``
    samples per person. Trials with duplicate indices are skipped.
    """
    if not (0 < lam < 1):
        raise ValueError("sign tracing uses lam in (0, 1)")
    trace, full, err, resampled = [], [], [], []
    for k in range(trials):
        ss_inst, ss_data, ss_noise = np.random.SeedSequence(seed, spawn_key=(k,)).spawn(3)
        inst = draw_hard_mean_instance(d, t, lam, np.random.default_rng(ss_inst))
        if np.unique(inst.j).size != t:
            continue
        rng_data = np.random.default_rng(ss_data)
        data = sample_est_data(inst, n, rng_data)
        signs = sign_estimator(data, np.random.default_rng(ss_noise))
        s = signs.per_person_sign.astype(np.float64)
        pj = inst.target_means()
        wts = r_weight(lam, pj)
        # centered[i, k, l] = x^{(i,k)}_{j_l} - p_{j_l}
        centered = data.x[:, :, inst.j] - pj
        per_l = centered.sum(axis=1)
        total = per_l.sum(axis=0)
        own = np.diagonal(per_l)
        trace.append(float(np.dot(wts * s, total - own)))
        full.append(float(np.dot(wts * s, total)))
        err.append(float(np.sum(np.where(s != np.where(pj >= 0, 1, -1), np.abs(pj), 0.0))))
        t_prime = 0.0
        for i in range(t):
            for kk in range(n):
                fresh = sample_product(inst.p, (1,), rng_data)[0]
                x_new = data.x[i].copy()
                x_new[kk] = fresh
                s2 = sign_estimator(data.replace(i, x_new), np.random.default_rng(ss_noise))
                _, tp = trace_sign(inst, signs, i, data.sample(i, kk), s2, lam)
                t_prime += tp
        resampled.append(t_prime)
    return SignTraceResult(lam, t, np.array(trace), np.array(full), np.array(err),
                           np.array(resampled))
