"""Compiled inner loops for macro experiments and the inventory simulator.

The sequential loop mirrors ``belief.BeliefState`` and ``policy`` operation
for operation so both paths produce the same floating-point values; the
lookahead scores, however, are computed in O(m (k - m)) per step from row
minima instead of by re-evaluating the whole objective for each candidate.
"""

import math

import numpy as np
from numba import njit

PAIR_CAP = 1e18
POLICY_AOA_GS = 0
POLICY_EA = 1


@njit(cache=True)
def _sq(delta, denom):
    if denom == 0.0:
        if delta == 0.0:
            return 0.0
        return PAIR_CAP if delta > 0 else -PAIR_CAP
    v = delta * abs(delta) / denom
    if v > PAIR_CAP:
        return PAIR_CAP
    if v < -PAIR_CAP:
        return -PAIR_CAP
    return v


@njit(cache=True)
def _refresh(i, counts, shift, sums, s2, mean, var, prior_mean, prior_prec, informative):
    t = counts[i]
    if not informative:
        mean[i] = shift[i] + sums[i] / t
        var[i] = s2[i] / t
        return
    v = 1.0 / (prior_prec + t / s2[i])
    sm = shift[i] + sums[i] / t
    mean[i] = v * (prior_prec * prior_mean + t * sm / s2[i])
    var[i] = v


@njit(cache=True)
def _observe(i, x, counts, shift, sums, sums_sq, s2, plugin, frozen, floor):
    if counts[i] == 0:
        shift[i] = x
    dx = x - shift[i]
    counts[i] += 1
    sums[i] += dx
    sums_sq[i] += dx * dx
    if plugin and not frozen:
        t = counts[i]
        if t >= 2:
            v = (sums_sq[i] - sums[i] * sums[i] / t) / (t - 1)
            s2[i] = v if v > floor else floor
        else:
            s2[i] = np.nan


@njit(cache=True)
def _before(a, b, mean):
    return mean[a] > mean[b] or (mean[a] == mean[b] and a < b)


@njit(cache=True)
def _sort_all(order, mean):
    k = order.shape[0]
    for i in range(k):
        order[i] = i
    for i in range(1, k):
        a = order[i]
        j = i - 1
        while j >= 0 and _before(a, order[j], mean):
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = a


@njit(cache=True)
def _reposition(order, a, mean):
    k = order.shape[0]
    p = 0
    while order[p] != a:
        p += 1
    while p > 0 and _before(a, order[p - 1], mean):
        order[p] = order[p - 1]
        p -= 1
    while p < k - 1 and _before(order[p + 1], a, mean):
        order[p] = order[p + 1]
        p += 1
    order[p] = a


@njit(cache=True)
def lookahead_scores(order, m, mean, var, var_next, scores):
    """Fill ``scores`` (indexed by alternative) and return the argmax, lowest index on ties."""
    k = order.shape[0]
    nc = k - m
    row_min = np.empty(m)
    row_arg = np.empty(m, dtype=np.int64)
    row_second = np.empty(m)
    for a in range(m):
        i = order[a]
        lo = np.inf
        lo2 = np.inf
        arg = -1
        for b in range(nc):
            j = order[m + b]
            v = _sq(mean[i] - mean[j], var[i] + var[j])
            if v < lo:
                lo2 = lo
                lo = v
                arg = b
            elif v < lo2:
                lo2 = v
        row_min[a] = lo
        row_arg[a] = arg
        row_second[a] = lo2

    hi = -np.inf
    hi2 = -np.inf
    hi_arg = -1
    for a in range(m):
        v = row_min[a]
        if v > hi:
            hi2 = hi
            hi = v
            hi_arg = a
        elif v > hi2:
            hi2 = v

    for a in range(m):
        i = order[a]
        adv = np.inf
        for b in range(nc):
            j = order[m + b]
            v = _sq(mean[i] - mean[j], var_next[i] + var[j])
            if v < adv:
                adv = v
        other = hi2 if a == hi_arg else hi
        scores[i] = adv if adv > other else other

    for b in range(nc):
        j = order[m + b]
        best = -np.inf
        for a in range(m):
            i = order[a]
            v = _sq(mean[i] - mean[j], var[i] + var_next[j])
            rest = row_second[a] if row_arg[a] == b else row_min[a]
            row = v if v < rest else rest
            if row > best:
                best = row
        scores[j] = best

    win = 0
    for c in range(1, k):
        if scores[c] > scores[win]:
            win = c
    return win


@njit(cache=True)
def run_sequential(table, m, n0, policy, prior_mean, prior_prec, informative,
                   known_var, plugin, freeze, floor, checkpoints, best):
    """One macro experiment over the outcome table; returns counts, selections, hits."""
    total, k = table.shape
    counts = np.zeros(k, dtype=np.int64)
    shift = np.zeros(k)
    sums = np.zeros(k)
    sums_sq = np.zeros(k)
    s2 = known_var.copy()
    mean = np.empty(k)
    var = np.empty(k)
    var_next = np.empty(k)
    scores = np.empty(k)
    order = np.empty(k, dtype=np.int64)
    ncp = checkpoints.shape[0]
    selected = np.empty((ncp, m), dtype=np.int64)
    hits = np.zeros(ncp, dtype=np.bool_)

    row = 0
    for _ in range(n0):
        for i in range(k):
            _observe(i, table[row, i], counts, shift, sums, sums_sq, s2, plugin, False, floor)
            row += 1
    for i in range(k):
        _refresh(i, counts, shift, sums, s2, mean, var, prior_mean, prior_prec, informative)
    _sort_all(order, mean)
    frozen = freeze

    cp = 0
    while cp < ncp and checkpoints[cp] == row:
        _record(order, m, best, selected, hits, cp)
        cp += 1

    while row < total:
        if policy == POLICY_AOA_GS:
            for i in range(k):
                if informative:
                    var_next[i] = 1.0 / (prior_prec + (counts[i] + 1) / s2[i])
                else:
                    var_next[i] = s2[i] / (counts[i] + 1)
            a = lookahead_scores(order, m, mean, var, var_next, scores)
        else:
            a = 0
            for i in range(1, k):
                if counts[i] < counts[a]:
                    a = i
        _observe(a, table[row, a], counts, shift, sums, sums_sq, s2, plugin, frozen, floor)
        _refresh(a, counts, shift, sums, s2, mean, var, prior_mean, prior_prec, informative)
        _reposition(order, a, mean)
        row += 1
        while cp < ncp and checkpoints[cp] == row:
            _record(order, m, best, selected, hits, cp)
            cp += 1
    return counts, selected, hits


@njit(cache=True)
def _record(order, m, best, selected, hits, cp):
    hit = False
    for a in range(m):
        selected[cp, a] = order[a]
        if order[a] == best:
            hit = True
    hits[cp] = hit


@njit(cache=True)
def inventory_costs(demand, s, big_s, init, holding, unit, setup, shortage, backlog):
    """Average per-stage cost, shape (n, k), for demand paths of shape (n, horizon)."""
    n, horizon = demand.shape
    k = s.shape[0]
    out = np.empty((n, k))
    for r in range(n):
        for i in range(k):
            level = init[i]
            total = 0.0
            for t in range(horizon):
                xi = demand[r, t]
                left = level - xi
                if xi <= level - s[i]:
                    total += holding * left
                    level = left
                elif xi <= level:
                    total += (holding - unit) * left + setup + unit * big_s[i]
                    level = big_s[i]
                else:
                    c = shortage * (xi - level) + setup + unit * big_s[i]
                    if backlog:
                        c += unit * (xi - level)
                    total += c
                    level = big_s[i]
            out[r, i] = total / horizon
    return out
