"""Private multitask learners for indexed mean estimation, sign estimation and
indexed classification, together with the reductions between them.

Every mean learner starts from the empirical mean of one sample per person
and adds Gaussian noise calibrated to what the framework lets an adversary
see:

==============  ==========================  ======================
framework       released to the adversary   noise variance
==============  ==========================  ======================
nonprivate      everything                  0
1-out-of-t      one other person's output   2 / (rho t^2)
JDP             all other outputs           2 (t - 1) / (rho t^2)
billboard       the whole mean vector       2 d / (rho t^2)
==============  ==========================  ======================
"""

from __future__ import annotations

import dataclasses
import enum
import math
from typing import Callable, Optional

import numpy as np

from dppersonal import privacy
from dppersonal.tasks import (
    ClassData,
    ClassSample,
    EstData,
    EstSample,
    MeanInstance,
    sample_class_data,
)


class FrameworkKind(str, enum.Enum):
    NONPRIVATE = "nonprivate"
    ONE_OUT_OF_T = "one_out_of_t"
    JDP = "jdp"
    BILLBOARD = "billboard"
    META = "meta"


@dataclasses.dataclass(frozen=True)
class MeanLearnerOutput:
    per_person_estimate: np.ndarray
    billboard: Optional[np.ndarray] = None
    framework: FrameworkKind = FrameworkKind.NONPRIVATE

    def to_record(self) -> dict:
        rec = {"framework": self.framework.value,
               "estimates": [float(v) for v in self.per_person_estimate]}
        if self.billboard is not None:
            rec["billboard"] = [float(v) for v in self.billboard]
        return rec


@dataclasses.dataclass(frozen=True)
class SignLearnerOutput:
    per_person_sign: np.ndarray
    framework: FrameworkKind = FrameworkKind.NONPRIVATE

    def __post_init__(self):
        s = np.asarray(self.per_person_sign, dtype=np.int8)
        if not np.all(np.abs(s) == 1):
            raise ValueError("signs must be +1 or -1")
        object.__setattr__(self, "per_person_sign", s)

    def to_record(self) -> dict:
        return {"framework": self.framework.value,
                "signs": [int(v) for v in self.per_person_sign]}


@dataclasses.dataclass(frozen=True)
class ClassifierOutput(SignLearnerOutput):
    """Person ``i`` predicts ``y = per_person_sign[i] * x[j_i]``."""

    def predict(self, person: int, feature):
        return self.per_person_sign[person] * np.asarray(feature)


def _one_sample(data: EstData) -> np.ndarray:
    if data.t == 0:
        raise ValueError("empty dataset")
    if data.n != 1:
        raise ValueError(f"mean learners take exactly one sample per person, got {data.n}")
    return data.x[:, 0, :]


def _target_means(data: EstData) -> np.ndarray:
    x = _one_sample(data)
    return x[:, data.j].mean(axis=0)


def noise_variance(framework, d: int, t: int, rho) -> float:
    """Per-coordinate Gaussian noise variance a learner adds."""
    framework = FrameworkKind(framework)
    if framework is FrameworkKind.NONPRIVATE:
        return 0.0
    r = privacy._as_rho(rho)
    if math.isinf(r):
        return 0.0
    if framework is FrameworkKind.ONE_OUT_OF_T:
        return 2.0 / (r * t * t)
    if framework is FrameworkKind.JDP:
        return 2.0 * (t - 1) / (r * t * t)
    return 2.0 * d / (r * t * t)


def sensitivity(framework, d: int, t: int) -> float:
    """l2 sensitivity of the view the framework protects."""
    framework = FrameworkKind(framework)
    if framework is FrameworkKind.ONE_OUT_OF_T:
        return 2.0 / t
    if framework is FrameworkKind.JDP:
        return 2.0 * math.sqrt(t - 1) / t
    if framework in (FrameworkKind.BILLBOARD, FrameworkKind.META):
        return 2.0 * math.sqrt(d) / t
    raise ValueError(f"{framework} adds no noise")


def nonprivate_mean(data: EstData) -> MeanLearnerOutput:
    return MeanLearnerOutput(_target_means(data), None, FrameworkKind.NONPRIVATE)


def one_out_of_t_mean(data: EstData, rho, rng: np.random.Generator) -> MeanLearnerOutput:
    """Empirical target means plus independent noise of variance 2/(rho t^2) each."""
    t = data.t
    est = privacy.gaussian_mechanism(_target_means(data), 2.0 / t, rho, rng)
    return MeanLearnerOutput(est, None, FrameworkKind.ONE_OUT_OF_T)


def jdp_mean(data: EstData, rho, rng: np.random.Generator) -> MeanLearnerOutput:
    """Noise variance 2(t-1)/(rho t^2): the view of the other t-1 people has
    sensitivity 2 sqrt(t-1)/t. With ``t == 1`` nobody else sees anything, so
    the nonprivate estimate is released."""
    t = data.t
    means = _target_means(data)
    if t == 1:
        return MeanLearnerOutput(means, None, FrameworkKind.JDP)
    sens = privacy.SensitivityBound(2.0 * math.sqrt(t - 1) / t)
    # The (t-1)-dim colluder view gets i.i.d. noise; sigma is per coordinate.
    est = privacy.gaussian_mechanism(means, sens, rho, rng)
    return MeanLearnerOutput(est, None, FrameworkKind.JDP)


def billboard_mean(data: EstData, rho, rng: np.random.Generator,
                   clip: bool = False) -> MeanLearnerOutput:
    """Publishes the noisy full mean vector; each person reads coordinate ``j_i``.

    Args:
      data: One sample per person.
      rho: zCDP budget of the published vector. ``inf`` publishes it exactly.
      rng: Noise source.
      clip: If set, personalization clips the read-out estimate to [-1, 1].
        The billboard itself is unchanged.
    """
    x = _one_sample(data)
    t, d = data.t, data.d
    board = privacy.gaussian_mechanism(x.mean(axis=0), 2.0 * math.sqrt(d) / t, rho, rng)
    est = board[data.j]
    if clip:
        est = np.clip(est, -1.0, 1.0)
    return MeanLearnerOutput(est, board, FrameworkKind.BILLBOARD)


def mean_learner(framework, rho=None, clip: bool = False) -> Callable:
    """Returns ``learner(data, rng) -> MeanLearnerOutput`` for a framework."""
    framework = FrameworkKind(framework)
    if framework is FrameworkKind.NONPRIVATE:
        return lambda data, rng: nonprivate_mean(data)
    if rho is None:
        raise ValueError(f"{framework.value} needs a privacy budget")
    if framework is FrameworkKind.ONE_OUT_OF_T:
        return lambda data, rng: one_out_of_t_mean(data, rho, rng)
    if framework is FrameworkKind.JDP:
        return lambda data, rng: jdp_mean(data, rho, rng)
    return lambda data, rng: billboard_mean(data, rho, rng, clip=clip)


def meta_from_billboard(train_data: EstData, test_sample: EstSample, rho,
                        rng: np.random.Generator, clip: bool = False):
    """Billboard metalearner: represent with the training tasks only, then
    personalize to the unseen test task by coordinate selection.

    Returns:
      ``(representation, test_estimate)``.
    """
    board = billboard_mean(train_data, rho, rng).billboard
    est = float(board[test_sample.j])
    if clip:
        est = min(1.0, max(-1.0, est))
    return board, est


def sign_from_mean(mean_output: MeanLearnerOutput) -> SignLearnerOutput:
    """Sign of each estimate, with sign(0) = +1."""
    est = np.asarray(mean_output.per_person_estimate)
    return SignLearnerOutput(np.where(est >= 0, 1, -1).astype(np.int8), mean_output.framework)


def classifier_from_sign(sign_output: SignLearnerOutput) -> ClassifierOutput:
    return ClassifierOutput(sign_output.per_person_sign, sign_output.framework)


def class_to_est_transform(sample: ClassSample) -> EstSample:
    """Recovers the auxiliary vector ``w``: undo the label flip on feature ``j``."""
    w = np.array(sample.x, copy=True)
    w[sample.j] = w[sample.j] * sample.y
    return EstSample(w, sample.j)


def est_to_class_transform(sample: EstSample, rng: np.random.Generator) -> ClassSample:
    y = 1 if rng.random() < 0.5 else -1
    x = np.array(sample.x, copy=True)
    x[sample.j] = x[sample.j] * y
    return ClassSample(x, sample.j, y)


def class_data_to_est(data: ClassData) -> EstData:
    """Vectorized ``class_to_est_transform`` over a whole dataset."""
    w = data.x.copy()
    rows = np.arange(data.t)
    w[rows, :, data.j] = data.x[rows, :, data.j] * data.y
    return EstData(w, data.j)


def est_data_to_class(data: EstData, rng: np.random.Generator) -> ClassData:
    """Vectorized ``est_to_class_transform``: fresh uniform labels per sample."""
    y = (rng.random((data.t, data.n)) < 0.5).astype(np.int8) * 2 - 1
    x = data.x.copy()
    rows = np.arange(data.t)
    x[rows, :, data.j] = data.x[rows, :, data.j] * y
    return ClassData(x, data.j, y)


def sign_learner(framework, rho=None) -> Callable:
    """``learner(EstData, rng) -> SignLearnerOutput`` via the mean learner."""
    base = mean_learner(framework, rho)
    return lambda data, rng: sign_from_mean(base(data, rng))


def class_learner(framework, rho=None) -> Callable:
    """Multitask classifier: undo label flips, estimate signs, predict s * x_j."""
    base = sign_learner(framework, rho)
    return lambda data, rng: classifier_from_sign(base(class_data_to_est(data.first(1)), rng))


def sign_estimator_from_classifier(classify: Callable, data: EstData,
                                   rng: np.random.Generator) -> SignLearnerOutput:
    """Sign estimation from two samples per person and any multitask classifier.

    The first samples are turned into labeled data and fed to ``classify``;
    person ``i`` then evaluates their classifier on their second, freshly
    labeled sample and multiplies by the feature to recover a sign.
    """
    if data.n != 2:
        raise ValueError(f"exactly two samples per person are required, got {data.n}")
    train = est_data_to_class(data.first(1), rng)
    clf = classify(train, rng)
    held_out = est_data_to_class(EstData(data.x[:, 1:2], data.j), rng)
    feature = held_out.x[np.arange(data.t), 0, data.j]
    signs = np.array([int(clf.predict(i, feature[i]) * feature[i]) for i in range(data.t)],
                     dtype=np.int8)
    return SignLearnerOutput(signs, clf.framework)


def loss_mean(inst: MeanInstance, out: MeanLearnerOutput) -> float:
    """Average of 1/4 (estimate - p_j)^2 over people."""
    err = np.asarray(out.per_person_estimate) - inst.target_means()
    return float(np.mean(0.25 * err * err))


def _sign(v):
    return np.where(np.asarray(v) >= 0, 1, -1)


def loss_sign(inst: MeanInstance, out: SignLearnerOutput) -> float:
    """Average of |p_j| over people whose sign estimate is wrong.

    Where ``p_j == 0`` the weight vanishes, so the sign convention there is moot.
    """
    pj = inst.target_means()
    wrong = np.asarray(out.per_person_sign) != _sign(pj)
    return float(np.mean(np.where(wrong, np.abs(pj), 0.0)))


def bayes_error(p) -> np.ndarray:
    """Misclassification rate of the best single-feature classifier."""
    return (1.0 - np.abs(np.asarray(p, dtype=np.float64))) / 2.0


def misclassification_rate(p, s) -> np.ndarray:
    """Error of ``y_hat = s * x_j`` when coordinate ``j`` has mean ``p``."""
    p = np.asarray(p, dtype=np.float64)
    s = np.asarray(s)
    return np.where(s == 1, (1.0 - p) / 2.0, (1.0 + p) / 2.0)


def loss_class_analytic(inst: MeanInstance, out: ClassifierOutput) -> float:
    """Average excess risk over the best single-feature classifier, in closed form."""
    pj = inst.target_means()
    # misclassification_rate - bayes_error, simplified to avoid cancellation.
    excess = (np.abs(pj) - out.per_person_sign * pj) / 2.0
    return float(np.mean(excess))


def excess_risk_monte_carlo(inst: MeanInstance, out: ClassifierOutput, n_test: int,
                            rng: np.random.Generator) -> float:
    """Empirical excess risk on fresh labeled samples, for checking the closed form."""
    test = sample_class_data(inst, n_test, rng)
    rows = np.arange(inst.t)
    feat = test.x[rows, :, inst.j]
    pred = out.per_person_sign[:, None] * feat
    best = _sign(inst.target_means())[:, None] * feat
    err = np.mean(pred != test.y, axis=1) - np.mean(best != test.y, axis=1)
    return float(np.mean(err))


def expected_loss_mean(inst: MeanInstance, framework, rho=None) -> float:
    """Exact E[loss_mean] for a fixed instance: 1/(4t) sum_i ((1-p_ji^2)/t + sigma^2)."""
    t = inst.t
    if FrameworkKind(framework) is FrameworkKind.JDP and t == 1:
        sigma2 = 0.0
    else:
        sigma2 = noise_variance(framework, inst.d, t, rho)
    pj = inst.target_means()
    return float(np.mean(0.25 * ((1.0 - pj * pj) / t + sigma2)))


def mean_loss_bound(framework, d: int, t: int, rho=None, epsilon=None, delta=None) -> float:
    """Upper bound on the multitask (or meta) mean-estimation loss."""
    framework = FrameworkKind(framework)
    base = 1.0 / (4 * t)
    if framework is FrameworkKind.NONPRIVATE:
        return base
    r = privacy._as_rho(rho)
    if framework is FrameworkKind.ONE_OUT_OF_T:
        return 1.0 / (2 * r * t * t) + base
    if framework is FrameworkKind.JDP:
        return (t - 1) / (2 * r * t * t) + base
    bb = d / (2 * r * t * t) + base
    if framework is FrameworkKind.META:
        return math.exp(epsilon) * bb + delta
    return bb


def class_loss_bound(framework, d: int, t: int, rho=None, epsilon=None, delta=None) -> float:
    """Upper bound on the excess classification (equivalently sign) loss."""
    framework = FrameworkKind(framework)
    base = 1.0 / math.sqrt(t)
    if framework is FrameworkKind.NONPRIVATE:
        return base
    r = privacy._as_rho(rho)
    if framework is FrameworkKind.ONE_OUT_OF_T:
        return math.sqrt(2.0) / (t * math.sqrt(r)) + base
    if framework is FrameworkKind.JDP:
        return math.sqrt(2.0 * (t - 1)) / (t * math.sqrt(r)) + base
    bb = math.sqrt(2.0 * d) / (t * math.sqrt(r)) + base
    if framework is FrameworkKind.META:
        return math.exp(epsilon) * bb + delta
    return bb
