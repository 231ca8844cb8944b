"""Asymptotic sampling ratios of the lookahead policy.

In the limit only the survivor (one true top-m member) and the k-m
alternatives outside the true top-m keep receiving samples. Their ratios
equalize the pairwise rate ``G`` between the survivor and every complement
member, and the survivor's ratio balances the complement through

    r_s = sigma_s * sqrt(sum_j r_j**2 / sigma_j**2).

Indices are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

MIN_GAP = 1e-12


def _check_rates(r_i: float, r_j: float) -> None:
    if not (r_i > 0 and r_j > 0):
        raise ValueError(f"sampling ratios must be positive, got ({r_i}, {r_j})")


def g_value(mu_i: float, sd_i: float, r_i: float, mu_j: float, sd_j: float, r_j: float) -> float:
    """Pairwise large-deviations rate ``(mu_i - mu_j)**2 / (sd_i**2/r_i + sd_j**2/r_j)``."""
    _check_rates(r_i, r_j)
    return (mu_i - mu_j) ** 2 / (sd_i ** 2 / r_i + sd_j ** 2 / r_j)


def g_partials(mu_i, sd_i, r_i, mu_j, sd_j, r_j) -> tuple[float, float]:
    """Analytic (dG/dr_i, dG/dr_j)."""
    _check_rates(r_i, r_j)
    denom = (sd_i ** 2 / r_i + sd_j ** 2 / r_j) ** 2
    gap2 = (mu_i - mu_j) ** 2
    return (sd_i / r_i) ** 2 * gap2 / denom, (sd_j / r_j) ** 2 * gap2 / denom


@dataclass(frozen=True)
class RatioProblem:
    means: np.ndarray
    stds: np.ndarray
    m: int
    survivor: Optional[int] = None
    min_gap: float = MIN_GAP
    top: np.ndarray = field(init=False, repr=False)
    complement: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        stds = np.asarray(self.stds, dtype=float)
        k = len(means)
        if stds.shape != means.shape:
            raise ValueError("means and stds must have the same length")
        if not np.all(stds > 0):
            raise ValueError("stds must be positive")
        if not 1 <= self.m < k:
            raise ValueError(f"need 1 <= m < k, got m={self.m}, k={k}")
        order = np.lexsort((np.arange(k), -means))
        top, comp = order[:self.m], order[self.m:]
        if means[top[-1]] - means[comp[0]] <= self.min_gap:
            raise ValueError("true top-m set is not separated from the rest")
        survivor = int(top[0]) if self.survivor is None else int(self.survivor)
        if survivor not in top:
            raise ValueError(f"survivor {survivor} is not a true top-{self.m} alternative")
        if np.any(np.abs(means[survivor] - means[comp]) <= self.min_gap):
            raise ValueError("survivor mean tied with a complement mean")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)
        object.__setattr__(self, "survivor", survivor)
        object.__setattr__(self, "top", np.sort(top))
        object.__setattr__(self, "complement", np.sort(comp))

    @property
    def k(self) -> int:
        return len(self.means)


@dataclass(frozen=True)
class RatioSolution:
    r: np.ndarray
    residual: float
    converged: bool
    iterations: int
    rate_residual: float
    balance_residual: float


def rate_residual(problem: RatioProblem, r: np.ndarray) -> float:
    """Relative spread ``(max - min) / max`` of survivor-vs-complement rates."""
    s = problem.survivor
    mu, sd = problem.means, problem.stds
    g = np.array([g_value(mu[s], sd[s], r[s], mu[j], sd[j], r[j]) for j in problem.complement])
    return float((g.max() - g.min()) / g.max())


def balance_residual(problem: RatioProblem, r: np.ndarray) -> float:
    """Relative violation of the survivor balance equation."""
    s = problem.survivor
    sd = problem.stds
    b = problem.complement
    target = sd[s] * math.sqrt(float(np.sum(r[b] ** 2 / sd[b] ** 2)))
    return float(abs(r[s] - target) / r[s])


def _complement_ratios(problem: RatioProblem, r_s: float) -> np.ndarray:
    """Complement ratios with equal rates against the survivor, summing to 1 - r_s."""
    s = problem.survivor
    b = problem.complement
    gap2 = (problem.means[s] - problem.means[b]) ** 2
    var_b = problem.stds[b] ** 2
    var_s_term = problem.stds[s] ** 2 / r_s
    g_max = float(np.min(gap2 / var_s_term))
    budget = 1.0 - r_s

    def ratios_at(frac):
        g = frac * g_max
        with np.errstate(over="ignore"):
            return var_b / (gap2 / g - var_s_term)

    frac = brentq(lambda f: ratios_at(f).sum() - budget, 1e-300, 1.0 - 1e-15,
                  xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    rb = ratios_at(frac)
    return rb * (budget / rb.sum())


def solve_ratios(problem: RatioProblem, tol: float = 1e-9, max_iter: int = 500) -> RatioSolution:
    """Nested bracketed root solve for the asymptotic ratios.

    For a trial survivor ratio the complement ratios are found exactly (equal
    rates, budget ``1 - r_s``). The survivor ratio is then the root of the
    balance gap ``r_s - sigma_s * sqrt(sum r_j**2 / sigma_j**2)``, which is
    negative as ``r_s -> 0`` (the complement holds the whole budget) and
    positive as ``r_s -> 1`` (the complement budget vanishes).
    """
    s = problem.survivor
    b = problem.complement
    sd = problem.stds

    def assemble(r_s):
        r = np.zeros(problem.k)
        r[s] = r_s
        r[b] = _complement_ratios(problem, r_s)
        return r

    def balance(r_s):
        rb = _complement_ratios(problem, r_s)
        return r_s - sd[s] * math.sqrt(float(np.sum(rb ** 2 / sd[b] ** 2)))

    lo, hi = 1e-12, 1.0 - 1e-12
    r_s, info = brentq(balance, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps,
                       maxiter=max_iter, full_output=True, disp=False)
    r = assemble(r_s)
    res9, res10 = rate_residual(problem, r), balance_residual(problem, r)
    res = max(res9, res10)
    return RatioSolution(r, res, bool(info.converged and res < tol), info.iterations, res9, res10)


@dataclass(frozen=True)
class Theorem2Report:
    """Residuals of the three balance conditions for a candidate survivor set."""

    equal_min_rate_residual: float
    argmin_sets: dict
    uncovered: frozenset
    cover_holds: bool
    equal_derivative_residual: float
    min_rates: dict
    min_derivatives: dict

    def all_hold(self, tol: float) -> bool:
        return (self.equal_min_rate_residual < tol and self.cover_holds
                and self.equal_derivative_residual < tol)


def _spread(values) -> float:
    v = np.asarray(list(values), dtype=float)
    if v.size <= 1:
        return 0.0
    return float((v.max() - v.min()) / v.max())


def check_theorem2_conditions(r: Sequence[float], gamma: Sequence[int], b: Sequence[int],
                              means: Sequence[float], stds: Sequence[float],
                              tol: float = 1e-9) -> Theorem2Report:
    """Evaluate, for ratios ``r``, whether several top members could share the budget.

    Reports the spread of per-member minimum rates over ``gamma``, whether the
    argmin sets (within relative ``tol``) cover ``b``, and the spread of the
    partial derivatives of each member's minimum rate.
    """
    r = np.asarray(r, dtype=float)
    mu = np.asarray(means, dtype=float)
    sd = np.asarray(stds, dtype=float)
    gamma = [int(i) for i in gamma]
    b = [int(j) for j in b]
    if not gamma or not b:
        raise ValueError("gamma and B must be non-empty")
    if set(gamma) & set(b) or len(set(gamma)) != len(gamma) or len(set(b)) != len(b):
        raise ValueError("gamma and B must be disjoint sets without repeats")
    if max(gamma + b) >= len(r) or min(gamma + b) < 0:
        raise ValueError("index out of range")
    support = gamma + b
    if np.any(r[support] <= 0):
        raise ValueError("ratios must be positive on gamma and B")
    if abs(r[support].sum() - 1.0) > 1e-9:
        raise ValueError("ratios on gamma and B must sum to 1")

    min_rates, argmins, min_derivs = {}, {}, {}
    for i in gamma:
        g = {j: g_value(mu[i], sd[i], r[i], mu[j], sd[j], r[j]) for j in b}
        low = min(g.values())
        j_set = frozenset(j for j, v in g.items() if v <= low * (1 + tol))
        min_rates[i] = low
        argmins[i] = j_set
        min_derivs[i] = min(g_partials(mu[i], sd[i], r[i], mu[j], sd[j], r[j])[0] for j in j_set)
    covered = frozenset().union(*argmins.values())
    uncovered = frozenset(b) - covered
    return Theorem2Report(_spread(min_rates.values()), argmins, uncovered, not uncovered,
                          _spread(min_derivs.values()), min_rates, min_derivs)


def empirical_ratios(counts: Sequence[int]) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("counts are all zero")
    return counts / total
