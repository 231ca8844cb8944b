"""Replication oracles: synthetic normal alternatives and an (s, S) inventory model.

Every environment returns values oriented so that larger is better; the
inventory model reports the negated average cost.

Besides single replications, each environment can build an outcome table of
shape (n, k) whose row t holds what the t-th replication would return for
each alternative. A sequential run reads one entry per row, so the values it
consumes are independent across rows and the table is only a vectorized way
of drawing them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._kernels import inventory_costs

MIN_GAP = 1e-12


class Direction(str, Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


@dataclass(frozen=True)
class Replication:
    alternative: int
    value: float


class AmbiguousBestError(ValueError):
    """The true best alternative is not separated from the runner-up."""


@dataclass(frozen=True)
class SyntheticNormal:
    means: np.ndarray
    stds: np.ndarray
    direction: Direction = Direction.MAXIMIZE

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        stds = np.asarray(self.stds, dtype=float)
        if means.shape != stds.shape or means.ndim != 1:
            raise ValueError("means and stds must be 1-d of equal length")
        if np.any(stds < 0) or not np.all(np.isfinite(means)):
            raise ValueError("stds must be >= 0 and means finite")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @property
    def k(self) -> int:
        return len(self.means)

    @property
    def true_means(self) -> np.ndarray:
        return self.means

    def sample(self, i: int, rng: np.random.Generator) -> Replication:
        return Replication(i, float(self.means[i] + self.stds[i] * rng.standard_normal()))

    def outcome_table(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.standard_normal(n)
        return self.means[None, :] + self.stds[None, :] * z[:, None]


@dataclass(frozen=True)
class Experiment1:
    """50 normal alternatives; means redrawn for every macro experiment.

    mu_i ~ N(0, ((51 - i) / 10)**2) and sigma_i = 51 - i for i = 1..50.
    """

    k: int = 50
    redraw_per_macro: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.k != 50:
            raise ValueError("the benchmark instance has exactly 50 alternatives")

    @property
    def stds(self) -> np.ndarray:
        return 51.0 - np.arange(1, 51, dtype=float)

    def draw_instance(self, rng: np.random.Generator) -> SyntheticNormal:
        return draw_experiment1_instance(rng)


def draw_experiment1_instance(rng: np.random.Generator) -> SyntheticNormal:
    sd = 51.0 - np.arange(1, 51, dtype=float)
    means = rng.normal(0.0, sd / 10.0)
    return SyntheticNormal(means, sd)


# (s, S) pairs for alternatives 1..20
DEFAULT_INVENTORY_TABLE = (
    (5, 45), (5, 50), (10, 45), (10, 50), (10, 55), (10, 60), (10, 65), (10, 70),
    (20, 40), (20, 45), (20, 50), (20, 55), (20, 60), (20, 65), (20, 70), (20, 75),
    (20, 80), (30, 50), (30, 55), (30, 60),
)


def stage_cost(level, demand, s, big_s, holding=1.0, unit=3.0, setup=32.0, shortage=5.0,
               backlog=False):
    """Per-stage cost of an (s, S) policy at inventory ``level`` facing ``demand``.

    With ``backlog`` the unmet demand is also bought at the unit cost when the
    stock is refilled; otherwise the shortage branch orders exactly S units.
    """
    level = np.asarray(level, dtype=float)
    demand = np.asarray(demand, dtype=float)
    left = level - demand
    order = setup + unit * np.asarray(big_s, dtype=float)
    short = shortage * (demand - level) + order
    if backlog:
        short = short + unit * (demand - level)
    return np.where(demand <= level - s, holding * left,
                    np.where(demand <= level, (holding - unit) * left + order, short))


def next_level(level, demand, s, big_s):
    """Level at the start of the next stage: keep the remainder or restock to S."""
    level = np.asarray(level, dtype=float)
    return np.where(demand + s <= level, level - demand, np.asarray(big_s, dtype=float))


@dataclass(frozen=True)
class Inventory:
    """Periodic-review (s, S) inventory with Poisson demand and zero lead time.

    A replication is the average cost over ``horizon`` stages; the returned
    value is its negation. ``initial_level`` is ``"zero"``, ``"s"``, ``"S"`` or
    a number. ``backlog=False`` reproduces the lost-sales accounting in which
    a stock-out orders exactly S units.
    """

    policies: tuple = DEFAULT_INVENTORY_TABLE
    demand_mean: float = 25.0
    horizon: int = 30
    setup_cost: float = 32.0
    unit_cost: float = 3.0
    holding_cost: float = 1.0
    shortage_cost: float = 5.0
    best: Optional[int] = 11
    backlog: bool = True
    initial_level: object = "zero"
    direction: Direction = Direction.MINIMIZE

    def __post_init__(self):
        pol = tuple((int(s), int(big)) for s, big in self.policies)
        if len(pol) < 2:
            raise ValueError("need at least two (s, S) alternatives")
        for s, big in pol:
            if not s < big:
                raise ValueError(f"policy (s={s}, S={big}) needs s < S")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.best is not None and not 0 <= self.best < len(pol):
            raise ValueError("configured best index out of range")
        if not (self.initial_level in ("zero", "s", "S")
                or isinstance(self.initial_level, (int, float))):
            raise ValueError(f"unknown initial level {self.initial_level!r}")
        object.__setattr__(self, "policies", pol)

    @property
    def k(self) -> int:
        return len(self.policies)

    def start_levels(self) -> np.ndarray:
        if self.initial_level == "zero":
            return np.zeros(self.k)
        if self.initial_level == "s":
            return self.s
        if self.initial_level == "S":
            return self.big_s
        return np.full(self.k, float(self.initial_level))

    @property
    def true_means(self) -> None:
        return None

    @property
    def s(self) -> np.ndarray:
        return np.array([p[0] for p in self.policies], dtype=float)

    @property
    def big_s(self) -> np.ndarray:
        return np.array([p[1] for p in self.policies], dtype=float)

    def average_costs(self, demand: np.ndarray, which=None) -> np.ndarray:
        """Average cost per stage for demand paths of shape (n, horizon).

        Returns shape (n, k), or (n, len(which)) when ``which`` selects alternatives.
        """
        s, big_s, init = self.s, self.big_s, self.start_levels()
        if which is not None:
            s, big_s, init = s[which], big_s[which], init[which]
        demand = np.ascontiguousarray(demand, dtype=float)
        return inventory_costs(demand, s, big_s, init, float(self.holding_cost),
                               float(self.unit_cost), float(self.setup_cost),
                               float(self.shortage_cost), bool(self.backlog))

    def draw_demand(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.poisson(self.demand_mean, size=(n, self.horizon))

    def sample(self, i: int, rng: np.random.Generator) -> Replication:
        cost = self.average_costs(self.draw_demand(rng, 1), which=[i])[0, 0]
        return Replication(i, -float(cost))

    def outcome_table(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return -self.average_costs(self.draw_demand(rng, n))


def load_inventory_table(path: str | Path) -> tuple:
    """Read (s, S) pairs from a CSV with columns index, s, S (index is 1-based)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"index", "s", "S"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing column(s) {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                rows.append((int(row["index"]), int(row["s"]), int(row["S"])))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line}: bad row {row}") from exc
    rows.sort()
    if [r[0] for r in rows] != list(range(1, len(rows) + 1)):
        raise ValueError(f"{path}: index column must run 1..n")
    return tuple((s, big) for _, s, big in rows)


def sample(env, i: int, rng: np.random.Generator) -> Replication:
    if not 0 <= i < env.k:
        raise IndexError(f"alternative {i} out of range for k={env.k}")
    return env.sample(i, rng)


def true_best(env, min_gap: float = MIN_GAP) -> int:
    if isinstance(env, Inventory):
        if env.best is None:
            raise AmbiguousBestError("inventory ground truth not configured")
        return env.best
    means = env.true_means
    order = np.argsort(-means, kind="stable")
    if means[order[0]] - means[order[1]] < min_gap:
        raise AmbiguousBestError("top two true means are tied")
    return int(order[0])


def inventory_oracle(env: Inventory, reps: int, rng: np.random.Generator,
                     chunk: int = 100_000) -> tuple[np.ndarray, np.ndarray]:
    """Long-run mean cost and its standard error per alternative.

    All alternatives see the same demand paths, which sharpens the comparison
    without changing each alternative's marginal estimate.
    """
    total = np.zeros(env.k)
    total_sq = np.zeros(env.k)
    done = 0
    while done < reps:
        n = min(chunk, reps - done)
        cost = env.average_costs(env.draw_demand(rng, n))
        total += cost.sum(axis=0)
        total_sq += (cost ** 2).sum(axis=0)
        done += n
    mean = total / reps
    var = (total_sq - reps * mean ** 2) / max(reps - 1, 1)
    return mean, np.sqrt(np.maximum(var, 0.0) / reps)
