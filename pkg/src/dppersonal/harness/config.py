"""Experiment configuration: validation, budget resolution and file loading."""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
import math
import pathlib
import sys
from typing import Optional, Sequence, Union

from dppersonal import privacy
from dppersonal.learners import FrameworkKind

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PROBLEMS = ("mean", "sign", "class", "meta_mean", "meta_class")
MODES = ("fixed", "uniform")
SWEEP_AXES = ("d", "t", "rho")
STATISTICS = ("auto", "full", "colluders")
MAX_SEED = 2 ** 64 - 1


class ConfigError(ValueError):
    pass


def _parse_float(v):
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError as e:
            raise ConfigError(f"not a number: {v!r}") from e
    return None if v is None else float(v)


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment.

    ``mode="fixed"`` uses ``p_fixed`` (a scalar broadcast to all ``d``
    coordinates, or a full vector) with ``j_fixed`` (default ``i mod d``);
    ``mode="uniform"`` draws ``p ~ U[-lam, lam]^d`` and uniform indices in
    every trial. Give the budget as ``rho`` or as ``epsilon`` with
    ``delta``. A ``delta`` next to ``rho`` is the conversion target used to
    report ``epsilon``.
    """

    problem: str = "mean"
    framework: FrameworkKind = FrameworkKind.NONPRIVATE
    d: int = 100
    t: int = 10
    n: int = 1
    rho: Optional[float] = None
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    lam: float = 1.0
    trials: int = 10_000
    seed: int = 0
    mode: str = "uniform"
    p_fixed: Union[float, tuple] = 0.0
    j_fixed: Optional[tuple] = None
    clip: bool = False
    sweep: Optional[dict] = None
    statistic: str = "auto"
    fpr: float = 0.05
    coupled: bool = True
    target: int = 0

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        try:
            set_("framework", FrameworkKind(self.framework))
        except ValueError as e:
            raise ConfigError(str(e)) from e
        for k in ("rho", "epsilon", "delta"):
            set_(k, _parse_float(getattr(self, k)))
        if isinstance(self.p_fixed, (list, tuple)):
            set_("p_fixed", tuple(float(v) for v in self.p_fixed))
        else:
            set_("p_fixed", float(self.p_fixed))
        if self.j_fixed is not None:
            set_("j_fixed", tuple(int(v) for v in self.j_fixed))
        if self.sweep is not None:
            set_("sweep", {k: tuple(v) for k, v in dict(self.sweep).items()})
        self._validate()

    def _validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for k in ("d", "t", "n", "trials"):
            v = getattr(self, k)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{k} must be a positive integer, got {v!r}")
        if not (isinstance(self.seed, int) and 0 <= self.seed <= MAX_SEED):
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not (0 < self.lam <= 1):
            raise ConfigError(f"lam must lie in (0, 1], got {self.lam}")
        if self.statistic not in STATISTICS:
            raise ConfigError(f"statistic must be one of {STATISTICS}")
        if not (0 < self.fpr < 1):
            raise ConfigError("fpr must lie in (0, 1)")
        if not (0 <= self.target < self.t):
            raise ConfigError("target must index a person")
        if isinstance(self.p_fixed, tuple):
            if len(self.p_fixed) != self.d:
                raise ConfigError("p_fixed vector must have length d")
            if any(abs(v) > 1 for v in self.p_fixed):
                raise ConfigError("p_fixed entries must lie in [-1, 1]")
        elif abs(self.p_fixed) > 1:
            raise ConfigError("p_fixed must lie in [-1, 1]")
        if self.j_fixed is not None:
            n_idx = self.t + 1 if self.is_meta else self.t
            if len(self.j_fixed) != n_idx or any(not 0 <= j < self.d for j in self.j_fixed):
                raise ConfigError(f"j_fixed must hold {n_idx} indices in [0, d)")
        if self.sweep is not None:
            for k, v in self.sweep.items():
                if k not in SWEEP_AXES:
                    raise ConfigError(f"unknown sweep axis {k!r}; allowed {SWEEP_AXES}")
                if len(v) == 0:
                    raise ConfigError(f"sweep axis {k!r} is empty")
        self._validate_budget()

    def _validate_budget(self):
        if self.rho is not None and self.epsilon is not None:
            raise ConfigError("give the budget as rho or as (epsilon, delta), not both")
        if self.epsilon is not None and self.delta is None:
            raise ConfigError("epsilon needs a delta")
        if self.rho is not None and not (self.rho > 0):
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if self.epsilon is not None and not (self.epsilon > 0):
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.delta is not None and not (0 < self.delta < 1):
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        private = self.framework is not FrameworkKind.NONPRIVATE
        if private and self.rho is None and self.epsilon is None:
            raise ConfigError(f"framework {self.framework.value} needs a privacy budget")
        if self.is_meta:
            if self.framework not in (FrameworkKind.BILLBOARD, FrameworkKind.META):
                raise ConfigError("metalearning problems need a billboard base learner")
            if self.delta is None:
                raise ConfigError("metalearning problems need delta to state their bound")
        if self.framework is FrameworkKind.META and not self.is_meta:
            raise ConfigError("framework 'meta' is only valid for meta_mean / meta_class")

    @property
    def is_meta(self) -> bool:
        return self.problem.startswith("meta")

    @property
    def learner_framework(self) -> FrameworkKind:
        """The multitask learner that actually runs (meta runs a billboard)."""
        if self.framework is FrameworkKind.META:
            return FrameworkKind.BILLBOARD
        return self.framework

    def resolved(self) -> "ExperimentConfig":
        """Copy with every derivable budget field filled in."""
        if self.framework is FrameworkKind.NONPRIVATE:
            return self
        if self.rho is None:
            rho = privacy.approx_dp_to_zcdp(self.epsilon, self.delta).rho
            return dataclasses.replace(self, rho=rho, epsilon=None).with_epsilon()
        if self.delta is not None and self.epsilon is None:
            return self.with_epsilon()
        return self

    def with_epsilon(self) -> "ExperimentConfig":
        if math.isinf(self.rho):
            eps = math.inf
        else:
            eps = privacy.zcdp_to_approx_dp(self.rho, self.delta).epsilon
        # Bypass validation: rho and epsilon coexist only after resolution.
        obj = dataclasses.replace(self, epsilon=None)
        object.__setattr__(obj, "epsilon", eps)
        return obj

    def replace(self, **changes) -> "ExperimentConfig":
        """``dataclasses.replace`` that re-validates from the unresolved budget."""
        base = dataclasses.asdict(self)
        if self.rho is not None and self.epsilon is not None:
            if "epsilon" in changes and "rho" not in changes:
                base["rho"] = None
            else:
                base["epsilon"] = None
        base.update(changes)
        return ExperimentConfig(**base)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["framework"] = self.framework.value
        if isinstance(self.p_fixed, tuple):
            d["p_fixed"] = list(self.p_fixed)
        if self.j_fixed is not None:
            d["j_fixed"] = list(self.j_fixed)
        if self.sweep is not None:
            d["sweep"] = {k: list(v) for k, v in self.sweep.items()}
        for k in ("rho", "epsilon"):
            if d[k] is not None and math.isinf(d[k]):
                d[k] = "inf"
        return d

    def fingerprint(self) -> str:
        """Stable 16-hex-digit identity of the experiment (seed and trials included)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def config_from_dict(raw: dict) -> ExperimentConfig:
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    raw = dict(raw)
    if "lambda" in raw:
        raw["lam"] = raw.pop("lambda")
    unknown = set(raw) - fields
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**raw)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Reads a JSON or TOML config; ``overrides`` (non-None values) win."""
    path = pathlib.Path(path)
    try:
        text = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        if path.suffix.lower() == ".toml":
            raw = tomllib.loads(text.decode("utf-8"))
        else:
            raw = json.loads(text)
    except (ValueError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a table/object")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_dict(raw)


def sweep_points(config: ExperimentConfig) -> Sequence[ExperimentConfig]:
    """Cartesian product of the sweep axes applied to ``config``."""
    axes = config.sweep or {}
    names = [k for k in SWEEP_AXES if k in axes]
    out = []
    for values in itertools.product(*(axes[k] for k in names)):
        out.append(config.replace(sweep=None, **dict(zip(names, values))))
    return out
