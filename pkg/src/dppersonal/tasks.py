"""Synthetic indexed mean-estimation and indexed classification problems.

Indices are 0-based throughout: a person's target coordinate ``j`` lies in
``range(d)``. Serialized instances carry ``"index_base": 0`` so readers
never have to guess.

Samples are stored as ``int8`` arrays with entries in {-1, +1}. A dataset
for ``t`` people with ``n`` samples each has ``x.shape == (t, n, d)``.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

INDEX_BASE = 0


@dataclasses.dataclass(frozen=True)
class MeanInstance:
    """Shared coordinate means ``p`` and per-person target indices ``j``.

    ``lam`` records the half-width of the range ``p`` was drawn from (1 for
    the generic problem). It only matters to the tracing statistics.
    """

    p: np.ndarray
    j: np.ndarray
    lam: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        j = np.asarray(self.j, dtype=np.int64)
        if p.ndim != 1 or j.ndim != 1:
            raise ValueError("p and j must be one-dimensional")
        if p.size == 0 or j.size == 0:
            raise ValueError("d and t must be positive")
        if np.any(np.abs(p) > 1):
            raise ValueError("coordinate means must lie in [-1, 1]")
        if np.any(j < 0) or np.any(j >= p.size):
            raise ValueError(f"indices must lie in [0, {p.size})")
        if not (0 < self.lam <= 1):
            raise ValueError(f"lam must lie in (0, 1], got {self.lam}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "j", j)

    @property
    def d(self) -> int:
        return self.p.size

    @property
    def t(self) -> int:
        return self.j.size

    def target_means(self) -> np.ndarray:
        """``p[j_i]`` for every person ``i``."""
        return self.p[self.j]


@dataclasses.dataclass(frozen=True)
class MetaInstance(MeanInstance):
    """A mean instance with ``t + 1`` indices; the last one is the test task."""

    def __post_init__(self):
        super().__post_init__()
        if self.j.size < 2:
            raise ValueError("a meta instance needs at least one training task")
        if np.any(np.abs(self.p) > self.lam):
            raise ValueError("coordinate means must lie in [-lam, lam]")

    @property
    def t(self) -> int:
        return self.j.size - 1

    @property
    def test_index(self) -> int:
        return int(self.j[-1])

    def training_instance(self) -> MeanInstance:
        return MeanInstance(self.p, self.j[:-1], self.lam)


@dataclasses.dataclass(frozen=True)
class EstSample:
    x: np.ndarray
    j: int


@dataclasses.dataclass(frozen=True)
class ClassSample:
    x: np.ndarray
    j: int
    y: int


@dataclasses.dataclass(frozen=True)
class EstData:
    """Per-person estimation samples: ``x`` is (t, n, d), ``j`` is (t,)."""

    x: np.ndarray
    j: np.ndarray

    @property
    def t(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def d(self) -> int:
        return self.x.shape[2]

    def sample(self, person: int, k: int = 0) -> EstSample:
        return EstSample(self.x[person, k], int(self.j[person]))

    def first(self, n: int = 1) -> "EstData":
        return EstData(self.x[:, :n], self.j)

    def replace(self, person: int, x_new: np.ndarray) -> "EstData":
        """Copy with person ``person``'s samples replaced by ``x_new`` (n, d)."""
        x = self.x.copy()
        x[person] = x_new
        return EstData(x, self.j)


@dataclasses.dataclass(frozen=True)
class ClassData:
    """Per-person labeled samples: ``x`` is (t, n, d), ``y`` is (t, n)."""

    x: np.ndarray
    j: np.ndarray
    y: np.ndarray

    @property
    def t(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def d(self) -> int:
        return self.x.shape[2]

    def sample(self, person: int, k: int = 0) -> ClassSample:
        return ClassSample(self.x[person, k], int(self.j[person]), int(self.y[person, k]))

    def first(self, n: int = 1) -> "ClassData":
        return ClassData(self.x[:, :n], self.j, self.y[:, :n])


def _pm1(bits: np.ndarray) -> np.ndarray:
    return bits.astype(np.int8) * 2 - 1


def sample_product(p: np.ndarray, shape: tuple, rng: np.random.Generator) -> np.ndarray:
    """Draws {-1, +1} vectors with independent coordinates of mean ``p``."""
    prob_plus = (1.0 + np.asarray(p, dtype=np.float64)) / 2.0
    return _pm1(rng.random(tuple(shape) + prob_plus.shape) < prob_plus)


def sample_est_data(inst: MeanInstance, n: int, rng: np.random.Generator) -> EstData:
    """``n`` samples per person from the product distribution with mean ``inst.p``."""
    if n < 1:
        raise ValueError("n must be positive")
    return EstData(sample_product(inst.p, (inst.t, n), rng), inst.j.copy())


def sample_class_data(inst: MeanInstance, n: int, rng: np.random.Generator) -> ClassData:
    """Labeled samples where the label flips only the person's target feature.

    For each sample an auxiliary ``w`` is drawn with means ``p`` and a label
    ``y`` uniformly; ``x`` equals ``w`` except ``x[j_i] = w[j_i] * y``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    w = sample_product(inst.p, (inst.t, n), rng)
    y = _pm1(rng.random((inst.t, n)) < 0.5)
    x = w
    rows = np.arange(inst.t)
    x[rows, :, inst.j] = w[rows, :, inst.j] * y
    return ClassData(x, inst.j.copy(), y)


def _check_lam(lam):
    if not (0 < lam <= 1):
        raise ValueError(f"lam must lie in (0, 1], got {lam}")


def draw_hard_mean_instance(d: int, t: int, lam: float, rng: np.random.Generator) -> MeanInstance:
    """``p`` uniform on [-lam, lam]^d and ``j`` uniform on [d]^t."""
    _check_lam(lam)
    if d < 1 or t < 1:
        raise ValueError("d and t must be positive")
    p = rng.uniform(-lam, lam, size=d)
    j = rng.integers(0, d, size=t)
    return MeanInstance(p, j, lam)


def draw_meta_instance(d: int, t: int, lam: float, rng: np.random.Generator) -> MetaInstance:
    """As ``draw_hard_mean_instance`` with ``t + 1`` i.i.d. indices (exchangeable)."""
    inst = draw_hard_mean_instance(d, t + 1, lam, rng)
    return MetaInstance(inst.p, inst.j, lam)


def has_duplicate_indices(j) -> bool:
    j = np.asarray(j)
    return np.unique(j).size != j.size


def birthday_duplicate_probability(t: int, d: int) -> float:
    """Exact probability that ``t`` uniform draws from ``d`` bins collide."""
    if t > d:
        return 1.0
    log_unique = math.fsum(math.log1p(-i / d) for i in range(1, t))
    return -math.expm1(log_unique)


def instance_to_record(inst: MeanInstance) -> dict:
    """Flat JSON-compatible record; floats are hex strings so they round-trip exactly."""
    return {
        "kind": "meta" if isinstance(inst, MetaInstance) else "mean",
        "index_base": INDEX_BASE,
        "d": inst.d,
        "t": inst.t,
        "lambda": float(inst.lam).hex(),
        "p": [float(v).hex() for v in inst.p],
        "j": [int(v) for v in inst.j],
    }


def instance_from_record(record: dict) -> MeanInstance:
    if record.get("index_base", INDEX_BASE) != INDEX_BASE:
        raise ValueError(f"unsupported index base {record['index_base']}")
    p = np.array([float.fromhex(v) for v in record["p"]], dtype=np.float64)
    j = np.array(record["j"], dtype=np.int64)
    lam = float.fromhex(record["lambda"])
    cls = MetaInstance if record.get("kind") == "meta" else MeanInstance
    inst = cls(p, j, lam)
    if inst.d != record["d"] or inst.t != record["t"]:
        raise ValueError("record dimensions disagree with its payload")
    return inst
