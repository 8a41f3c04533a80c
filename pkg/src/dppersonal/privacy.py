"""Privacy budgets, zCDP <-> (eps, delta) conversion and the Gaussian mechanism."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

_INVERSION_TOL = 1e-9


@dataclasses.dataclass(frozen=True)
class ZcdpBudget:
    """A rho-zCDP budget. ``rho = inf`` denotes no privacy (zero noise)."""

    rho: float

    def __post_init__(self):
        if not (self.rho >= 0):
            raise ValueError(f"rho must be nonnegative, got {self.rho}")


@dataclasses.dataclass(frozen=True)
class ApproxDpBudget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not (self.epsilon >= 0):
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        _check_delta(self.delta)


@dataclasses.dataclass(frozen=True)
class SensitivityBound:
    """l2 sensitivity of a vector query under replacement of one person."""

    delta_two: float

    def __post_init__(self):
        if not (0 <= self.delta_two < math.inf):
            raise ValueError(
                f"sensitivity must be finite and nonnegative, got {self.delta_two}")


def _check_delta(delta):
    if not (0 < delta < 1):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def _as_rho(rho) -> float:
    return rho.rho if isinstance(rho, ZcdpBudget) else float(rho)


def zcdp_to_approx_dp(rho, delta: float) -> ApproxDpBudget:
    """Converts rho-zCDP to (eps, delta)-DP via eps = rho + 2 sqrt(rho ln(1/delta)).

    Args:
      rho: A ``ZcdpBudget`` or a float.
      delta: Target delta in (0, 1).

    Returns:
      The implied ``ApproxDpBudget``.
    """
    _check_delta(delta)
    r = _as_rho(rho)
    if r < 0:
        raise ValueError(f"rho must be nonnegative, got {r}")
    eps = r + 2.0 * math.sqrt(r * math.log(1.0 / delta))
    return ApproxDpBudget(eps, delta)


def approx_dp_to_zcdp(epsilon: float, delta: float) -> ZcdpBudget:
    """Largest rho whose (eps, delta) conversion does not exceed ``epsilon``.

    The forward map is strictly increasing in rho, so it is inverted by
    bisection to 1e-9 in epsilon. The returned rho is always on the
    feasible side, i.e.
    ``zcdp_to_approx_dp(rho, delta).epsilon <= epsilon``.
    """
    if not (epsilon > 0):
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _check_delta(delta)
    log_term = math.log(1.0 / delta)

    def forward(r):
        return r + 2.0 * math.sqrt(r * log_term)

    lo, hi = 0.0, epsilon
    while forward(hi) <= epsilon:
        hi *= 2.0
    # Invariant: forward(lo) <= epsilon < forward(hi).
    for _ in range(2000):
        if epsilon - forward(lo) <= _INVERSION_TOL * max(1.0, epsilon):
            break
        mid = 0.5 * (lo + hi)
        if forward(mid) <= epsilon:
            lo = mid
        else:
            hi = mid
    return ZcdpBudget(lo)


def gaussian_sigma(sensitivity, rho) -> float:
    """Noise standard deviation sqrt(Delta^2 / (2 rho)) for rho-zCDP."""
    delta_two = (sensitivity.delta_two if isinstance(sensitivity, SensitivityBound)
                 else float(sensitivity))
    r = _as_rho(rho)
    if r <= 0:
        raise ValueError("rho must be positive for a noise-adding mechanism")
    if delta_two == 0 or math.isinf(r):
        return 0.0
    return math.sqrt(delta_two ** 2 / (2.0 * r))


def gaussian_mechanism(value, sensitivity, rho, rng: np.random.Generator) -> np.ndarray:
    """Releases ``value + N(0, sigma^2 I)`` with sigma^2 = Delta^2 / (2 rho).

    A zero-sensitivity query is returned unchanged and draws nothing from
    ``rng``. Otherwise exactly ``len(value)`` standard normals are consumed,
    which keeps coupled runs aligned.
    """
    value = np.asarray(value, dtype=np.float64)
    sigma = gaussian_sigma(sensitivity, rho)
    if sigma == 0.0:
        return value.copy()
    return value + sigma * rng.standard_normal(value.shape)


def gaussian_renyi_divergence(mean_gap: float, sigma: float, alpha: float) -> float:
    """Renyi divergence of order alpha between N(mu, sigma^2) and N(mu + gap, sigma^2)."""
    if not (sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not (alpha > 1):
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    return alpha * mean_gap * mean_gap / (2.0 * sigma * sigma)
