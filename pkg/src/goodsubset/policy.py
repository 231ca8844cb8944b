"""Allocation rules: the value-function-approximation lookahead and equal allocation.

Pairwise quantities are kept as signed squares ``sign(d) * d**2`` of the
standardized posterior mean difference, saturated at ``PAIR_CAP`` so that a
pair with zero posterior variance on both sides counts as resolved instead of
producing NaN in later max/min reductions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .belief import BeliefState, InvalidConfigurationError, UndefinedPosteriorError, top_split

PAIR_CAP = 1e18


class PolicyKind(str, Enum):
    AOA_GS = "aoa-gs"
    EQUAL = "ea"
    EXTERNAL = "external"


@dataclass(frozen=True)
class AllocationDecision:
    alternative: int
    score: float
    scores_all: Optional[np.ndarray] = None


# name -> callable(state, m) -> AllocationDecision; slot for rules such as OCBA-rgm
EXTERNAL_POLICIES: dict[str, Callable[[BeliefState, int], AllocationDecision]] = {}


def register_policy(name: str, rule: Callable[[BeliefState, int], AllocationDecision]) -> None:
    EXTERNAL_POLICIES[name] = rule


def d_pair(state: BeliefState, i: int, j: int) -> float:
    """Posterior mean difference of i over j in units of its posterior std."""
    if i == j:
        raise ValueError("d_pair needs two distinct alternatives")
    mu, var = state.posterior_mean, state.posterior_var
    if not (math.isfinite(mu[i]) and math.isfinite(mu[j])
            and math.isfinite(var[i]) and math.isfinite(var[j])):
        raise UndefinedPosteriorError(f"posterior undefined for pair ({i}, {j})")
    delta = mu[i] - mu[j]
    scale = math.sqrt(var[i] + var[j])
    if scale == 0.0:
        return 0.0 if delta == 0.0 else math.copysign(math.inf, delta)
    return delta / scale


def signed_square(delta, denom):
    """``sign(delta) * delta**2 / denom`` with the zero-variance conventions."""
    delta = np.asarray(delta, dtype=float)
    denom = np.asarray(denom, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = delta * np.abs(delta) / denom
    out = np.where(denom == 0.0, np.where(delta == 0.0, 0.0, np.sign(delta) * PAIR_CAP), out)
    return np.clip(out, -PAIR_CAP, PAIR_CAP)


def _checked(state: BeliefState, m: int):
    top, comp = top_split(state, m)
    var = state.posterior_var
    if not np.all(np.isfinite(var)):
        raise UndefinedPosteriorError("posterior variances undefined; initialize every alternative")
    return top, comp, state.posterior_mean, var


def pair_matrix(mu, var_top, var_comp, top, comp) -> np.ndarray:
    """m x (k-m) signed-square statistics between top members and the complement."""
    delta = mu[top][:, None] - mu[comp][None, :]
    return signed_square(delta, var_top[:, None] + var_comp[None, :])


def vfa(state: BeliefState, m: int) -> float:
    """max over top members of the squared smallest standardized gap to the complement."""
    top, comp, mu, var = _checked(state, m)
    d2 = pair_matrix(mu, var[top], var[comp], top, comp)
    return float(d2.min(axis=1).max())


def lookahead_scores(state: BeliefState, m: int) -> np.ndarray:
    """Certainty-equivalent one-step lookahead value of sampling each alternative.

    Means stay frozen, so the ranking is the current one; only the sampled
    alternative's posterior variance moves to its one-step-ahead value.
    """
    top, comp, mu, var = _checked(state, m)
    var_next = state.next_posterior_var()
    base = pair_matrix(mu, var[top], var[comp], top, comp)
    row_min = base.min(axis=1)
    scores = np.empty(state.k)

    for a, i in enumerate(top):
        advanced = signed_square(mu[i] - mu[comp], var_next[i] + var[comp]).min()
        others = np.delete(row_min, a)
        scores[i] = max(advanced, others.max()) if others.size else advanced

    for b, j in enumerate(comp):
        advanced = signed_square(mu[top] - mu[j], var[top] + var_next[j])
        rest = np.delete(base, b, axis=1)
        per_row = np.minimum(advanced, rest.min(axis=1)) if rest.shape[1] else advanced
        scores[j] = per_row.max()
    return scores


def _argmax_lowest(scores: np.ndarray) -> int:
    # np.argmax returns the first maximum, i.e. the lowest index on ties
    return int(np.argmax(scores))


def aoa_gs_select(state: BeliefState, m: int) -> AllocationDecision:
    scores = lookahead_scores(state, m)
    best = _argmax_lowest(scores)
    return AllocationDecision(best, float(scores[best]), scores)


def ea_select(state: BeliefState) -> AllocationDecision:
    """Least-sampled alternative, lowest index first."""
    counts = state.counts
    best = int(np.argmin(counts))
    return AllocationDecision(best, float(-counts[best]), None)


def select(kind: PolicyKind | str, state: BeliefState, m: int,
           external: Optional[str] = None) -> AllocationDecision:
    kind = PolicyKind(kind)
    if kind is PolicyKind.AOA_GS:
        return aoa_gs_select(state, m)
    if kind is PolicyKind.EQUAL:
        return ea_select(state)
    if external not in EXTERNAL_POLICIES:
        raise InvalidConfigurationError(f"no external policy registered under {external!r}")
    return EXTERNAL_POLICIES[external](state, m)
