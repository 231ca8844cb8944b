"""Monte Carlo estimates of the posterior probability of correct selection.

Covers the union-over-top-members probability, its max-over-members lower
bound, the per-member orthant-type probability expressed through a Cholesky
factor of the pairwise-difference covariance, and the inscribed-ball
approximation to that probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc

_CHUNK = 1 << 17


@dataclass(frozen=True)
class PosteriorSnapshot:
    means: np.ndarray
    variances: np.ndarray
    m: int
    ranking: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        variances = np.asarray(self.variances, dtype=float)
        if means.shape != variances.shape or means.ndim != 1:
            raise ValueError("means and variances must be 1-d of equal length")
        if np.any(variances < 0) or not np.all(np.isfinite(variances)):
            raise ValueError("variances must be finite and >= 0")
        if not 1 <= self.m < len(means):
            raise ValueError(f"need 1 <= m < k, got m={self.m}, k={len(means)}")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "ranking", np.lexsort((np.arange(len(means)), -means)))

    @classmethod
    def from_state(cls, state, m: int) -> "PosteriorSnapshot":
        return cls(state.posterior_mean, state.posterior_var, m)

    @property
    def k(self) -> int:
        return len(self.means)

    @property
    def top(self) -> np.ndarray:
        return self.ranking[:self.m]

    @property
    def complement(self) -> np.ndarray:
        return self.ranking[self.m:]


@dataclass(frozen=True)
class PairDiffModel:
    """Joint normal law of (mu_<i> - mu_<j>) over complement members j."""

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray


def difference_matrix(n_complement: int) -> np.ndarray:
    """(n+1) x n matrix mapping (mu_i, mu_j1..mu_jn) to the n differences mu_i - mu_j."""
    g = np.zeros((n_complement + 1, n_complement))
    g[0, :] = 1.0
    g[1:, :] = -np.eye(n_complement)
    return g


def psd_cholesky(a: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Lower Cholesky factor that tolerates zero pivots of a PSD matrix.

    A pivot below ``rtol`` times the largest diagonal entry is treated as a
    deterministic coordinate: its column is set to zero.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    low = np.zeros_like(a)
    scale = float(np.max(np.abs(np.diag(a)))) if n else 0.0
    cutoff = rtol * scale
    for j in range(n):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if pivot < -1e-8 * scale:
            raise np.linalg.LinAlgError("matrix is not positive semi-definite")
        if pivot <= cutoff:
            continue
        low[j, j] = math.sqrt(pivot)
        low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def pair_diff_model(snapshot: PosteriorSnapshot, i: int) -> PairDiffModel:
    """Model for the top member at rank position ``i`` (0-based, < m)."""
    if not 0 <= i < snapshot.m:
        raise ValueError(f"rank {i} is not in the top {snapshot.m}")
    lead = snapshot.top[i]
    comp = snapshot.complement
    mean = snapshot.means[lead] - snapshot.means[comp]
    lam = np.diag(np.concatenate(([snapshot.variances[lead]], snapshot.variances[comp])))
    gam = difference_matrix(len(comp))
    cov = gam.T @ lam @ gam
    return PairDiffModel(mean, cov, psd_cholesky(cov))


def _binomial(hits: int, n: int) -> tuple[float, float]:
    p = hits / n
    return p, math.sqrt(p * (1 - p) / n)


def mc_region_probability(model: PairDiffModel, n_samples: int,
                          rng: np.random.Generator) -> tuple[float, float]:
    """P(L z > -mean componentwise) for standard normal z; estimate and std error."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    dim = len(model.mean)
    hits = 0
    done = 0
    while done < n_samples:
        n = min(_CHUNK, n_samples - done)
        z = rng.standard_normal((n, dim))
        y = z @ model.chol.T
        hits += int(np.count_nonzero(np.all(y > -model.mean, axis=1)))
        done += n
    return _binomial(hits, n_samples)


def ball_probability(d: float, dim: int) -> float:
    """P(|z| <= d) for a ``dim``-dimensional standard normal z."""
    if d < 0:
        raise ValueError("radius must be non-negative")
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    # |z|^2 is chi-square with ``dim`` degrees of freedom
    return float(gammainc(dim / 2.0, d * d / 2.0))


def min_pair_statistic(snapshot: PosteriorSnapshot, i: int) -> float:
    """Smallest standardized gap between top rank ``i`` and the complement."""
    lead = snapshot.top[i]
    comp = snapshot.complement
    delta = snapshot.means[lead] - snapshot.means[comp]
    scale = np.sqrt(snapshot.variances[lead] + snapshot.variances[comp])
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(scale > 0, delta / scale, np.where(delta == 0, 0.0, np.sign(delta) * np.inf))
    return float(d.min())


def approximation_gap(snapshot: PosteriorSnapshot, i: int, d_i: float | None,
                      n_samples: int, rng: np.random.Generator) -> float:
    """|region probability - inscribed-ball probability| for top rank ``i``."""
    if d_i is None:
        d_i = min_pair_statistic(snapshot, i)
    region, _ = mc_region_probability(pair_diff_model(snapshot, i), n_samples, rng)
    ball = ball_probability(max(d_i, 0.0), snapshot.k - snapshot.m) if math.isfinite(d_i) else 1.0
    return abs(region - ball)


def approximation_sweep(snapshot: PosteriorSnapshot, i: int, scales, n_samples: int,
                        seed: int) -> list[dict]:
    """Region vs ball probability as all posterior mean gaps are scaled.

    Every scale reuses the same normal draws, so the regions are nested and the
    comparison across scales carries no extra Monte Carlo noise.
    """
    rows = []
    for c in scales:
        scaled = PosteriorSnapshot(snapshot.means * c, snapshot.variances, snapshot.m)
        d = min_pair_statistic(scaled, i)
        model = pair_diff_model(scaled, i)
        region, se = mc_region_probability(model, n_samples, np.random.default_rng(seed))
        ball = ball_probability(max(d, 0.0), scaled.k - scaled.m) if math.isfinite(d) else 1.0
        rows.append({"scale": float(c), "d": d, "region_estimate": region,
                     "region_std_error": se, "ball_value": ball, "gap": abs(region - ball)})
    return rows


def _win_indicators(snapshot: PosteriorSnapshot, n: int, rng: np.random.Generator) -> np.ndarray:
    """(n, m) booleans: sampled mean of each top member beats every complement member."""
    draws = snapshot.means + np.sqrt(snapshot.variances) * rng.standard_normal((n, snapshot.k))
    best_rest = draws[:, snapshot.complement].max(axis=1)
    return draws[:, snapshot.top] > best_rest[:, None]


def _estimate(snapshot: PosteriorSnapshot, n_samples: int, rng: np.random.Generator,
              union: bool) -> tuple[float, float]:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    hits = np.zeros(snapshot.m, dtype=np.int64)
    any_hits = 0
    done = 0
    while done < n_samples:
        n = min(_CHUNK, n_samples - done)
        wins = _win_indicators(snapshot, n, rng)
        hits += wins.sum(axis=0)
        any_hits += int(np.count_nonzero(wins.any(axis=1)))
        done += n
    if union:
        return _binomial(any_hits, n_samples)
    return _binomial(int(hits.max()), n_samples)


def estimate_pcs_lower_bound(snapshot: PosteriorSnapshot, n_samples: int,
                             rng: np.random.Generator) -> tuple[float, float]:
    """Max over top members of P(member beats the whole complement)."""
    return _estimate(snapshot, n_samples, rng, union=False)


def estimate_pcs_exact(snapshot: PosteriorSnapshot, n_samples: int,
                       rng: np.random.Generator) -> tuple[float, float]:
    """P(some top member beats the whole complement), i.e. the best lies in the top set."""
    return _estimate(snapshot, n_samples, rng, union=True)
