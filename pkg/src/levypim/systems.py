"""Slow-fast system definitions, built-in drift catalog, trajectory container."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError
from .stable import StableSpec

REJECT_THRESHOLD = 1e12  # |state| beyond this marks a path rejected


@dataclass(frozen=True)
class SlowFastSystem:
    """Coupled pair dX = f1(X,Y) dt + sigma1 dL1,
    dY = (1/eps) f2(X,Y) dt + (sigma2/eps^(1/alpha2)) dL2.

    ``beta`` is the declared one-sided contraction constant of ``f2`` in y
    (checked by :func:`levypim.direct.probe_contraction`, not estimated).

    Structure hints let solvers pick an exact accelerated path:

    * ``fast_linear_rate=r`` declares ``f2(x, y) = -r * y``;
    * ``slow_g0``/``slow_g1``/``fast_h`` declare the separable form
      ``f1(x, y) = g0(x) + g1(x) * h(y)`` (``slow_g1=None`` means f1 ignores
      y entirely), which lets the drift estimator stream over micro states;
    * ``vectorized`` declares that ``f1``/``f2`` broadcast elementwise.
    """

    f1: Callable
    f2: Callable
    sigma1: float
    sigma2: float
    epsilon: float
    noise1: StableSpec
    noise2: StableSpec
    dim_slow: int = 1
    dim_fast: int = 1
    beta: float = 1.0
    name: str = "custom"
    fast_linear_rate: Optional[float] = None
    slow_g0: Optional[Callable] = None
    slow_g1: Optional[Callable] = None
    fast_h: Optional[Callable] = None
    vectorized: bool = True

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.sigma1 < 0.0 or self.sigma2 < 0.0:
            raise ParameterError("noise intensities must be nonnegative")
        if self.dim_slow < 1 or self.dim_fast < 1:
            raise ParameterError("dimensions must be positive")
        if self.beta <= 0.0:
            raise ParameterError(f"declared beta must be positive, got {self.beta}")

    @property
    def scalar(self) -> bool:
        return self.dim_slow == 1 and self.dim_fast == 1

    @property
    def separable(self) -> bool:
        return self.slow_g0 is not None

    def micro_mean(self, x, ymat):
        """mean_m f1(x, Y_m) over the trailing axis of ``ymat``, exploiting the
        declared separable structure (exact f1(x) when f1 ignores y)."""
        if not self.separable:
            raise ParameterError("system does not declare a separable slow drift")
        g0 = np.asarray(self.slow_g0(x), dtype=np.float64)
        if self.slow_g1 is None:
            return g0
        return g0 + self.slow_g1(x) * self.fast_h(ymat).mean(axis=-1)

    def with_epsilon(self, epsilon: float) -> "SlowFastSystem":
        return replace(self, epsilon=epsilon)


@dataclass
class Trajectory:
    """States on a strictly increasing time grid starting at 0."""

    times: np.ndarray
    states: np.ndarray  # (len(times), dim)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if self.times.ndim != 1 or len(self.times) != len(self.states):
            raise ParameterError("times and states must have matching length")
        if len(self.times) == 0 or self.times[0] != 0.0:
            raise ParameterError("trajectory must start at time 0")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0.0):
            raise ParameterError("times must be strictly increasing")

    @property
    def values(self) -> np.ndarray:
        """First component, as a flat array (convenience for scalar systems)."""
        return self.states[:, 0]

    def __len__(self):
        return len(self.times)


# ---------------------------------------------------------------------------
# Built-in drifts

def _example_f1(x, y):
    return -x + np.sin(x) * np.exp(-np.square(y))


def _example_f2(x, y):
    return -y


def _neg(x):
    return -np.asarray(x, dtype=np.float64)


def _gauss_kernel(y):
    from . import fastmath as fm

    return fm.exp(-np.square(y))


def _cubic_f2(x, y):
    return -y ** 3 - y


def _expanding_f2(x, y):
    return y


def _linear_f1(x, y):
    return -x


@dataclass(frozen=True)
class DriftPair:
    name: str
    f1: Callable
    f2: Callable
    beta: float
    fast_linear_rate: Optional[float] = None
    slow_g0: Optional[Callable] = None
    slow_g1: Optional[Callable] = None
    fast_h: Optional[Callable] = None
    vectorized: bool = True


DRIFT_REGISTRY = {
    # slow relaxation with an averaged sin coupling; fast Ornstein-Uhlenbeck.
    # f1(x,y) = -x + sin(x) exp(-y^2) in separable form
    "paper_example": DriftPair(
        "paper_example", _example_f1, _example_f2, beta=1.0,
        fast_linear_rate=1.0, slow_g0=_neg, slow_g1=np.sin, fast_h=_gauss_kernel,
    ),
    # f1 independent of y: the projective scheme must reduce to plain
    # Euler-Maruyama of the slow equation, bitwise
    "linear_slow": DriftPair(
        "linear_slow", _linear_f1, _example_f2, beta=1.0,
        fast_linear_rate=1.0, slow_g0=_neg,
    ),
    # dissipative nonlinear fast drift, for contraction probing
    "cubic_fast": DriftPair("cubic_fast", _example_f1, _cubic_f2, beta=1.0),
    # violates the contraction hypothesis on purpose
    "expanding_fast": DriftPair("expanding_fast", _linear_f1, _expanding_f2, beta=1.0),
}


def make_system(name: str, alpha: float = 1.5, sigma1: float = 1.0,
                sigma2: float = 1.0, epsilon: float = 0.1,
                alpha2: Optional[float] = None) -> SlowFastSystem:
    """Instantiate a registered drift pair as a full system.

    ``alpha2`` defaults to ``alpha``; the two stability indices may differ.
    """
    if name not in DRIFT_REGISTRY:
        raise ParameterError(
            f"unknown system {name!r}; registered: {sorted(DRIFT_REGISTRY)}")
    d = DRIFT_REGISTRY[name]
    return SlowFastSystem(
        f1=d.f1, f2=d.f2, sigma1=sigma1, sigma2=sigma2, epsilon=epsilon,
        noise1=StableSpec(alpha), noise2=StableSpec(alpha2 if alpha2 is not None else alpha),
        beta=d.beta, name=name, fast_linear_rate=d.fast_linear_rate,
        slow_g0=d.slow_g0, slow_g1=d.slow_g1, fast_h=d.fast_h,
        vectorized=d.vectorized,
    )
