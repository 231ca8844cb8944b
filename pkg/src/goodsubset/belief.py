"""Normal-conjugate posterior state for k independent alternatives.

Alternatives are indexed from 0 inside the library. Each alternative keeps
running moments about a shift (its first observation) so that the plug-in
sample variance does not suffer from cancellation when the mean is large
relative to the spread.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class InvalidConfigurationError(ValueError):
    """Raised when a belief, policy or experiment is configured inconsistently."""


class UndefinedPosteriorError(RuntimeError):
    """Raised when an operation needs a posterior that is not defined yet."""


DEFAULT_VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class PriorSpec:
    """Prior on each unknown mean.

    ``variance=None`` is the uninformative (flat) limit; otherwise every
    alternative starts from N(mean, variance).
    """

    mean: float = 0.0
    variance: Optional[float] = None

    def __post_init__(self):
        if self.variance is not None:
            if not (math.isfinite(self.variance) and self.variance > 0):
                raise InvalidConfigurationError("informative prior variance must be > 0")
            if not math.isfinite(self.mean):
                raise InvalidConfigurationError("informative prior mean must be finite")

    @classmethod
    def uninformative(cls) -> "PriorSpec":
        return cls()

    @classmethod
    def informative(cls, mean: float, variance: float) -> "PriorSpec":
        return cls(float(mean), float(variance))

    @property
    def is_informative(self) -> bool:
        return self.variance is not None

    @property
    def precision(self) -> float:
        return 0.0 if self.variance is None else 1.0 / self.variance


@dataclass(frozen=True)
class VarianceMode:
    """How the sampling variance of each alternative is obtained.

    ``known`` uses the given variances. ``plugin`` uses the unbiased sample
    variance, refreshed on every observation unless ``freeze_after_init`` is
    set, in which case the estimate is frozen once initialization ends.
    """

    kind: str = "plugin"
    variances: Optional[tuple] = None
    freeze_after_init: bool = False
    floor: float = DEFAULT_VARIANCE_FLOOR

    def __post_init__(self):
        if self.kind not in ("known", "plugin"):
            raise InvalidConfigurationError(f"unknown variance mode {self.kind!r}")
        if self.kind == "known":
            if self.variances is None:
                raise InvalidConfigurationError("known variance mode needs variances")
            v = np.asarray(self.variances, dtype=float)
            if not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise InvalidConfigurationError("known variances must be finite and > 0")
            object.__setattr__(self, "variances", tuple(float(x) for x in v))
        if not self.floor > 0:
            raise InvalidConfigurationError("variance floor must be > 0")

    @classmethod
    def known(cls, variances: Sequence[float]) -> "VarianceMode":
        return cls("known", tuple(variances))

    @classmethod
    def plugin(cls, freeze_after_init: bool = False,
               floor: float = DEFAULT_VARIANCE_FLOOR) -> "VarianceMode":
        return cls("plugin", None, freeze_after_init, floor)


@dataclass(frozen=True)
class AlternativeBelief:
    """Read-only view of one alternative's posterior and sample statistics."""

    count: int
    sum: float
    sum_sq: float
    posterior_mean: float
    posterior_var: float
    sampling_var: float

    @property
    def defined(self) -> bool:
        return math.isfinite(self.posterior_mean) and math.isfinite(self.posterior_var)


@dataclass
class BeliefState:
    """Posterior state after ``step`` observations spread over k alternatives.

    ``sums`` and ``sums_sq`` hold moments of ``x - shift`` where ``shift`` is
    the first observation of each alternative.
    """

    prior: PriorSpec
    var_mode: VarianceMode
    counts: np.ndarray
    shift: np.ndarray
    sums: np.ndarray
    sums_sq: np.ndarray
    sampling_var: np.ndarray
    frozen: bool = False
    _mean: np.ndarray = field(init=False, repr=False)
    _var: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._mean = np.empty(self.k)
        self._var = np.empty(self.k)
        for i in range(self.k):
            self._refresh(i)

    @property
    def k(self) -> int:
        return len(self.counts)

    @property
    def step(self) -> int:
        return int(self.counts.sum())

    @property
    def posterior_mean(self) -> np.ndarray:
        return self._mean.copy()

    @property
    def posterior_var(self) -> np.ndarray:
        return self._var.copy()

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self._mean) & np.isfinite(self._var)

    @property
    def sample_mean(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.shift + self.sums / self.counts, np.nan)

    @property
    def ranking(self) -> np.ndarray:
        """Alternatives by descending posterior mean; ties by ascending index."""
        return np.lexsort((np.arange(self.k), -self._mean))

    @property
    def beliefs(self) -> list[AlternativeBelief]:
        out = []
        for i in range(self.k):
            t = int(self.counts[i])
            raw_sum = self.sums[i] + t * self.shift[i]
            raw_sq = self.sums_sq[i] + 2 * self.shift[i] * self.sums[i] + t * self.shift[i] ** 2
            out.append(AlternativeBelief(t, float(raw_sum), float(raw_sq),
                                         float(self._mean[i]), float(self._var[i]),
                                         float(self.sampling_var[i])))
        return out

    def next_posterior_var(self) -> np.ndarray:
        """Posterior variance each alternative would have after one more sample."""
        with np.errstate(divide="ignore", invalid="ignore"):
            if not self.prior.is_informative:
                return self.sampling_var / (self.counts + 1)
            return 1.0 / (self.prior.precision + (self.counts + 1) / self.sampling_var)

    def observe(self, i: int, x: float) -> None:
        """In-place Bayes update with observation ``x`` of alternative ``i``."""
        if not 0 <= i < self.k:
            raise IndexError(f"alternative {i} out of range for k={self.k}")
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"non-finite observation {x!r} for alternative {i}")
        if self.counts[i] == 0:
            self.shift[i] = x
        dx = x - self.shift[i]
        self.counts[i] += 1
        self.sums[i] += dx
        self.sums_sq[i] += dx * dx
        if self.var_mode.kind == "plugin" and not self.frozen:
            self.sampling_var[i] = _plugin_variance(
                int(self.counts[i]), self.sums[i], self.sums_sq[i], self.var_mode.floor)
        self._refresh(i)

    def freeze_variances(self) -> None:
        """Stop refreshing plug-in variances (sensitivity option)."""
        self.frozen = True

    def _refresh(self, i: int) -> None:
        t = int(self.counts[i])
        s2 = self.sampling_var[i]
        tau0 = self.prior.precision
        if not self.prior.is_informative:
            if t == 0:
                self._mean[i], self._var[i] = np.nan, np.inf
                return
            self._mean[i] = self.shift[i] + self.sums[i] / t
            self._var[i] = s2 / t if math.isfinite(s2) else np.nan
            return
        if t == 0:
            self._mean[i], self._var[i] = self.prior.mean, self.prior.variance
            return
        if not math.isfinite(s2):
            self._mean[i], self._var[i] = np.nan, np.nan
            return
        var = 1.0 / (tau0 + t / s2)
        sample_mean = self.shift[i] + self.sums[i] / t
        self._mean[i] = var * (tau0 * self.prior.mean + t * sample_mean / s2)
        self._var[i] = var


def _plugin_variance(t: int, s: float, ss: float, floor: float) -> float:
    if t < 2:
        return np.nan
    v = (ss - s * s / t) / (t - 1)
    return max(v, floor)


def init_beliefs(k: int, prior: PriorSpec | None = None,
                 var_mode: VarianceMode | None = None) -> BeliefState:
    """Fresh state with no observations."""
    if k < 2:
        raise InvalidConfigurationError(f"need at least 2 alternatives, got k={k}")
    prior = PriorSpec.uninformative() if prior is None else prior
    var_mode = VarianceMode.plugin() if var_mode is None else var_mode
    if var_mode.kind == "known":
        if len(var_mode.variances) != k:
            raise InvalidConfigurationError(
                f"{len(var_mode.variances)} known variances given for k={k}")
        s2 = np.array(var_mode.variances, dtype=float)
    else:
        s2 = np.full(k, np.nan)
    return BeliefState(prior, var_mode, np.zeros(k, dtype=np.int64), np.zeros(k),
                       np.zeros(k), np.zeros(k), s2)


def update(state: BeliefState, i: int, x: float) -> BeliefState:
    """Return a new state with one more observation; ``state`` is untouched."""
    new = copy.deepcopy(state)
    new.observe(i, x)
    return new


def top_split(state: BeliefState, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Estimated top-m set and its complement, both in ranking order."""
    if not 1 <= m < state.k:
        raise InvalidConfigurationError(f"need 1 <= m < k, got m={m}, k={state.k}")
    if not np.all(np.isfinite(state._mean)):
        raise UndefinedPosteriorError("posterior means undefined; initialize every alternative")
    order = state.ranking
    return order[:m], order[m:]
