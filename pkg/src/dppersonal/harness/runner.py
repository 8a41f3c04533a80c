"""Seeded Monte Carlo trials and their aggregation."""

from __future__ import annotations

import concurrent.futures
import dataclasses
import logging
import math
from typing import Iterator, List, Optional

import numpy as np
from scipy import stats

from dppersonal import attacks, learners
from dppersonal.harness.config import ConfigError, ExperimentConfig
from dppersonal.learners import FrameworkKind
from dppersonal.tasks import (
    EstSample,
    MeanInstance,
    MetaInstance,
    draw_hard_mean_instance,
    draw_meta_instance,
    sample_class_data,
    sample_est_data,
    sample_product,
)

logger = logging.getLogger("dppersonal")

Z95 = float(stats.norm.ppf(0.975))


@dataclasses.dataclass(frozen=True)
class TrialRecord:
    """One trial. ``(config, trial)`` regenerates it exactly.

    ``reference_loss`` is the multitask loss of the same billboard in
    metalearning trials. ``stat_in`` / ``stat_out`` are set by attack runs.
    """

    fingerprint: str
    trial: int
    instance_seed: int
    loss: Optional[float]
    sigma2: float
    reference_loss: Optional[float] = None
    stat_in: Optional[float] = None
    stat_out: Optional[float] = None


@dataclasses.dataclass(frozen=True)
class AggregateReport:
    fingerprint: str
    problem: str
    framework: str
    d: int
    t: int
    n: int
    rho: Optional[float]
    epsilon: Optional[float]
    delta: Optional[float]
    trials: int
    mean: float
    se: float
    ci_low: float
    ci_high: float
    sigma2: float
    exact_law: Optional[float]
    bound: Optional[float]
    bound_satisfied: Optional[bool]
    reference_mean: Optional[float] = None
    meta_gap_se: Optional[float] = None

    @property
    def exact_law_z(self) -> Optional[float]:
        """(mean - exact law) in standard errors."""
        if self.exact_law is None or not self.se > 0:
            return None
        return (self.mean - self.exact_law) / self.se

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["exact_law_z"] = self.exact_law_z
        return d


@dataclasses.dataclass
class ExperimentResult:
    report: AggregateReport
    records: List[TrialRecord]


def trial_streams(seed: int, trial: int):
    """Independent (instance, data, noise) seed sequences for one trial."""
    return np.random.SeedSequence(seed, spawn_key=(trial,)).spawn(3)


def noise_sigma2(config: ExperimentConfig) -> float:
    fw = config.learner_framework
    if fw is FrameworkKind.JDP and config.t == 1:
        return 0.0
    return learners.noise_variance(fw, config.d, config.t, config.rho)


def build_instance(config: ExperimentConfig, rng: np.random.Generator) -> MeanInstance:
    n_idx = config.t + 1 if config.is_meta else config.t
    if config.mode == "uniform":
        if config.is_meta:
            return draw_meta_instance(config.d, config.t, config.lam, rng)
        return draw_hard_mean_instance(config.d, config.t, config.lam, rng)
    if isinstance(config.p_fixed, tuple):
        p = np.array(config.p_fixed)
    else:
        p = np.full(config.d, config.p_fixed)
    j = (np.array(config.j_fixed) if config.j_fixed is not None
         else np.arange(n_idx) % config.d)
    cls = MetaInstance if config.is_meta else MeanInstance
    return cls(p, j, config.lam)


def exact_law(config: ExperimentConfig) -> Optional[float]:
    """Expected loss in closed form, where one exists (unclipped mean problems)."""
    if config.problem not in ("mean", "meta_mean") or config.clip:
        return None
    sigma2 = noise_sigma2(config)
    t = config.t
    if config.mode == "uniform":
        return 0.25 * ((1.0 - config.lam ** 2 / 3.0) / t + sigma2)
    inst = build_instance(config, None)
    if config.is_meta:
        pt = inst.p[inst.test_index]
        return 0.25 * ((1.0 - pt * pt) / t + sigma2)
    return learners.expected_loss_mean(inst, config.learner_framework, config.rho)


def loss_bound(config: ExperimentConfig) -> float:
    args = (config.d, config.t, config.rho, config.epsilon, config.delta)
    if config.problem == "mean":
        return learners.mean_loss_bound(config.framework, *args)
    if config.problem in ("sign", "class"):
        return learners.class_loss_bound(config.framework, *args)
    if config.problem == "meta_mean":
        return learners.mean_loss_bound(FrameworkKind.META, *args)
    return learners.class_loss_bound(FrameworkKind.META, *args)


def _wrong_sign_loss(p, s):
    return float(np.mean(np.where(np.asarray(s) != np.where(p >= 0, 1, -1), np.abs(p), 0.0)))


def run_trial(config: ExperimentConfig, trial: int, fingerprint: Optional[str] = None
              ) -> TrialRecord:
    """Runs trial ``trial`` of a resolved config."""
    ss_inst, ss_data, ss_noise = trial_streams(config.seed, trial)
    inst = build_instance(config, np.random.default_rng(ss_inst))
    rng_data = np.random.default_rng(ss_data)
    rng_noise = np.random.default_rng(ss_noise)
    fw, rho = config.learner_framework, config.rho
    reference = None

    if config.problem == "mean":
        data = sample_est_data(inst, config.n, rng_data).first(1)
        out = learners.mean_learner(fw, rho, config.clip)(data, rng_noise)
        loss = learners.loss_mean(inst, out)
    elif config.problem == "sign":
        data = sample_est_data(inst, config.n, rng_data).first(1)
        loss = learners.loss_sign(inst, learners.sign_learner(fw, rho)(data, rng_noise))
    elif config.problem == "class":
        data = sample_class_data(inst, config.n, rng_data)
        clf = learners.class_learner(fw, rho)(data, rng_noise)
        loss = learners.loss_class_analytic(inst, clf)
    else:
        train_inst = inst.training_instance()
        train = sample_est_data(train_inst, config.n, rng_data).first(1)
        test_x = sample_product(inst.p, (1,), rng_data)[0]
        board, est = learners.meta_from_billboard(
            train, EstSample(test_x, inst.test_index), rho, rng_noise, config.clip)
        p_test = inst.p[inst.test_index]
        train_est = board[train_inst.j]
        if config.clip:
            train_est = np.clip(train_est, -1.0, 1.0)
        pj = train_inst.target_means()
        if config.problem == "meta_mean":
            loss = 0.25 * (est - p_test) ** 2
            reference = float(np.mean(0.25 * (train_est - pj) ** 2))
        else:
            s_test = 1 if est >= 0 else -1
            loss = abs(p_test) if s_test != (1 if p_test >= 0 else -1) else 0.0
            reference = _wrong_sign_loss(pj, np.where(train_est >= 0, 1, -1))

    return TrialRecord(
        fingerprint=fingerprint or config.fingerprint(),
        trial=trial,
        instance_seed=int(ss_inst.generate_state(1, np.uint64)[0]),
        loss=float(loss),
        sigma2=noise_sigma2(config),
        reference_loss=None if reference is None else float(reference),
    )


def _run_chunk(config: ExperimentConfig, start: int, stop: int, fingerprint: str):
    return [run_trial(config, k, fingerprint) for k in range(start, stop)]


def _chunks(trials: int, parts: int):
    parts = max(1, min(parts, trials))
    bounds = np.linspace(0, trials, parts + 1).astype(int)
    return list(zip(bounds[:-1], bounds[1:]))


def prepare(config: ExperimentConfig) -> ExperimentConfig:
    """Resolves the budget, checks preconditions and logs the run header."""
    config = config.resolved()
    if config.n > 1:
        logger.warning("n=%d requested; learners use only the first sample per person",
                       config.n)
    logger.info("resolved config %s seed=%d fingerprint=%s",
                config.to_dict(), config.seed, config.fingerprint())
    return config


def iter_trial_records(config: ExperimentConfig, parallelism: int = 1
                       ) -> Iterator[TrialRecord]:
    """Yields records in trial order; workers run contiguous chunks."""
    fp = config.fingerprint()
    if parallelism <= 1:
        for k in range(config.trials):
            yield run_trial(config, k, fp)
        return
    with concurrent.futures.ProcessPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(_run_chunk, config, a, b, fp)
                   for a, b in _chunks(config.trials, 4 * parallelism)]
        for fut in futures:
            yield from fut.result()


def _mean_se(values):
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, math.nan
    ss = math.fsum((v - mean) ** 2 for v in values)
    return mean, math.sqrt(ss / (n - 1) / n)


def aggregate(config: ExperimentConfig, losses, references=None) -> AggregateReport:
    """Summarizes per-trial losses in trial order.

    The bound counts as satisfied when the mean is within 3 standard
    errors below it, so a bound that is tight in expectation passes.
    """
    mean, se = _mean_se(losses)
    bound = loss_bound(config)
    half = Z95 * se if se == se else 0.0
    tol = 3 * se if se == se else 0.0
    ref_mean = gap_se = None
    if references is not None:
        ref_mean, _ = _mean_se(references)
        e = math.exp(config.epsilon)
        _, gap_se = _mean_se([a - e * b for a, b in zip(losses, references)])
    return AggregateReport(
        fingerprint=config.fingerprint(), problem=config.problem,
        framework=config.framework.value, d=config.d, t=config.t, n=config.n,
        rho=config.rho, epsilon=config.epsilon, delta=config.delta,
        trials=len(losses), mean=mean, se=se, ci_low=mean - half, ci_high=mean + half,
        sigma2=noise_sigma2(config), exact_law=exact_law(config), bound=bound,
        bound_satisfied=bool(mean - tol <= bound),
        reference_mean=ref_mean, meta_gap_se=gap_se)


def run_experiment(config: ExperimentConfig, parallelism: int = 1,
                   keep_records: bool = True, sink=None) -> ExperimentResult:
    """Runs every trial of ``config`` and aggregates the losses.

    Args:
      config: Experiment to run; the budget is resolved first.
      parallelism: Worker processes. Results do not depend on it.
      keep_records: Keep the TrialRecords in the result.
      sink: Optional callable receiving each record as it is produced.

    Returns:
      An ``ExperimentResult``.
    """
    config = prepare(config)
    losses, refs, kept = [], [], []
    for rec in iter_trial_records(config, parallelism):
        losses.append(rec.loss)
        if rec.reference_loss is not None:
            refs.append(rec.reference_loss)
        if keep_records:
            kept.append(rec)
        if sink is not None:
            sink(rec)
    report = aggregate(config, losses, refs if config.is_meta else None)
    return ExperimentResult(report, kept)


def attack_learner(config: ExperimentConfig):
    return learners.mean_learner(config.learner_framework, config.rho, config.clip)


def run_attack(config: ExperimentConfig, min_trials: int = 1000):
    """Membership inference against the config's mean learner.

    Returns:
      ``(AttackReport, records)``.
    """
    config = prepare(config)
    if config.problem != "mean" or config.mode != "uniform":
        raise ConfigError("attacks run on the mean problem with uniform hard instances")
    private = (config.framework is not FrameworkKind.NONPRIVATE
               and not math.isinf(config.rho))
    if private and config.delta is None:
        raise ConfigError("a private attack target needs delta to state the DP bound")
    try:
        report = attacks.membership_inference_experiment(
            attack_learner(config), config.d, config.t, config.trials, config.seed,
            fpr=config.fpr, lam=config.lam, statistic=config.statistic,
            epsilon=config.epsilon if private else None,
            delta=config.delta if private else None,
            coupled=config.coupled, target=config.target, min_trials=min_trials)
    except attacks.PreconditionError as e:
        raise ConfigError(str(e)) from e
    fp = config.fingerprint()
    sigma2 = noise_sigma2(config)
    records = [
        TrialRecord(fp, k, int(trial_streams(config.seed, k)[0].generate_state(1, np.uint64)[0]),
                    None, sigma2, None, float(a), float(b))
        for k, (a, b) in enumerate(zip(report.stats_in, report.stats_out))]
    return report, records
