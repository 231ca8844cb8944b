"""Macro-experiment driver: initialization, sequential allocation, IPCS curves.

Each macro replication draws everything from its own Philox stream keyed by
``(seed, macro_index)``, and results are aggregated with integer sums only,
so curves and ratio reports do not depend on how macros are split across
worker processes.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .belief import InvalidConfigurationError, PriorSpec, VarianceMode, init_beliefs, top_split
from .envs import Experiment1, Inventory, SyntheticNormal, true_best
from .policy import PolicyKind, select
from .ratios import RatioProblem, rate_residual, balance_residual, solve_ratios

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    env: object
    m: int
    T: int
    n0: int = 10
    policy: PolicyKind = PolicyKind.AOA_GS
    macros: int = 20_000
    seed: int = 0
    checkpoints: tuple = ()
    prior: PriorSpec = field(default_factory=PriorSpec.uninformative)
    var_mode: VarianceMode = field(default_factory=VarianceMode.plugin)
    external: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "policy", PolicyKind(self.policy))
        k = self.env.k
        if not 1 <= self.m < k:
            raise InvalidConfigurationError(f"need 1 <= m < k, got m={self.m}, k={k}")
        if self.n0 < 1:
            raise InvalidConfigurationError("n0 must be >= 1")
        if self.var_mode.kind == "plugin" and self.n0 < 2:
            raise InvalidConfigurationError("plug-in variances need n0 >= 2")
        if self.var_mode.kind == "known" and len(self.var_mode.variances) != k:
            raise InvalidConfigurationError(f"need {k} known variances")
        if k * self.n0 > self.T:
            raise InvalidConfigurationError(
                f"budget T={self.T} is below the initialization cost k*n0={k * self.n0}")
        if self.macros < 1:
            raise InvalidConfigurationError("macros must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidConfigurationError("seed must be a 64-bit unsigned integer")
        cps = tuple(int(c) for c in self.checkpoints) or (self.T,)
        if list(cps) != sorted(set(cps)):
            raise InvalidConfigurationError("checkpoints must be strictly increasing")
        if cps[0] < k * self.n0 or cps[-1] > self.T:
            raise InvalidConfigurationError(
                f"checkpoints must lie in [k*n0, T] = [{k * self.n0}, {self.T}]")
        object.__setattr__(self, "checkpoints", cps)
        if self.policy is PolicyKind.EXTERNAL and not self.external:
            raise InvalidConfigurationError("external policy needs a registered name")

    @property
    def k(self) -> int:
        return self.env.k


@dataclass(frozen=True)
class MacroResult:
    selected: np.ndarray      # (n_checkpoints, m), ranking order
    correct: np.ndarray       # (n_checkpoints,) bool
    final_counts: np.ndarray  # (k,)
    survivor: int
    best: int


@dataclass(frozen=True)
class IpcsCurve:
    checkpoints: tuple
    ipcs: np.ndarray
    std_error: np.ndarray
    macros: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    curve: IpcsCurve
    hits: np.ndarray
    count_totals: np.ndarray         # (k,) summed final counts
    survivor_hist: np.ndarray        # (k,)
    survivor_counts: np.ndarray      # (k, k): row = survivor, summed final counts

    @property
    def mean_ratios(self) -> np.ndarray:
        return self.count_totals / (self.config.macros * self.config.T)

    def conditional_ratios(self, survivor: int) -> np.ndarray:
        n = self.survivor_hist[survivor]
        if n == 0:
            raise ValueError(f"alternative {survivor} was never the survivor")
        return self.survivor_counts[survivor] / (n * self.config.T)

    @property
    def modal_survivor(self) -> int:
        return int(np.argmax(self.survivor_hist))

    def ratio_report(self) -> list[dict]:
        """Per-alternative empirical ratios against the asymptotic solution.

        Conditional ratios average only the macros whose survivor is the most
        frequent one. Theory columns are NaN when the true means are unknown or
        redrawn per macro.
        """
        s = self.modal_survivor
        cond = self.conditional_ratios(s)
        theory = np.full(self.config.k, np.nan)
        env = self.config.env
        if isinstance(env, SyntheticNormal):
            try:
                sol = solve_ratios(RatioProblem(env.means, env.stds, self.config.m, survivor=s))
                theory = sol.r
            except ValueError as exc:
                log.warning("no asymptotic ratios for this instance: %s", exc)
        rows = []
        for i in range(self.config.k):
            rows.append({"alternative": i + 1, "mean_ratio": float(self.mean_ratios[i]),
                         "conditional_ratio": float(cond[i]), "survivor": s + 1,
                         "theory_ratio": float(theory[i]),
                         "residual": float(cond[i] - theory[i])})
        return rows

    def empirical_balance_residuals(self, survivor: Optional[int] = None) -> tuple[float, float]:
        """Equal-rate and survivor-balance residuals of the conditional ratios."""
        env = self.config.env
        s = self.modal_survivor if survivor is None else survivor
        problem = RatioProblem(env.means, env.stds, self.config.m, survivor=s)
        r = self.conditional_ratios(s)
        return rate_residual(problem, r), balance_residual(problem, r)


def macro_rng(seed: int, macro_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(macro_index,))))


def _macro_env(config: ExperimentConfig, rng: np.random.Generator):
    env = config.env
    if isinstance(env, Experiment1):
        return env.draw_instance(rng)
    return env


def _known_var(config: ExperimentConfig) -> np.ndarray:
    if config.var_mode.kind == "known":
        return np.array(config.var_mode.variances, dtype=float)
    return np.full(config.k, np.nan)


def run_macro(config: ExperimentConfig, macro_index: int) -> MacroResult:
    """One full sequential run; deterministic in ``(config.seed, macro_index)``."""
    rng = macro_rng(config.seed, macro_index)
    env = _macro_env(config, rng)
    best = true_best(env)
    table = np.ascontiguousarray(env.outcome_table(rng, config.T))
    if config.policy is PolicyKind.EXTERNAL:
        return _run_macro_python(config, table, best)
    code = _kernels.POLICY_AOA_GS if config.policy is PolicyKind.AOA_GS else _kernels.POLICY_EA
    try:
        counts, selected, hits = _kernels.run_sequential(
            table, config.m, config.n0, code, float(config.prior.mean),
            float(config.prior.precision), config.prior.is_informative, _known_var(config),
            config.var_mode.kind == "plugin", config.var_mode.freeze_after_init,
            float(config.var_mode.floor), np.array(config.checkpoints, dtype=np.int64), best)
    except Exception as exc:
        raise RuntimeError(f"macro {macro_index} failed: {exc}") from exc
    return _result(selected, hits, counts, best)


def run_macro_reference(config: ExperimentConfig, macro_index: int) -> MacroResult:
    """Same run as ``run_macro`` through the readable belief/policy modules."""
    rng = macro_rng(config.seed, macro_index)
    env = _macro_env(config, rng)
    best = true_best(env)
    return _run_macro_python(config, env.outcome_table(rng, config.T), best)


def _run_macro_python(config: ExperimentConfig, table: np.ndarray, best: int) -> MacroResult:
    k, m = config.k, config.m
    state = init_beliefs(k, config.prior, config.var_mode)
    row = 0
    for _ in range(config.n0):
        for i in range(k):
            state.observe(i, table[row, i])
            row += 1
    if config.var_mode.freeze_after_init:
        state.freeze_variances()
    selected, hits = [], []

    def record():
        top, _ = top_split(state, m)
        selected.append(top.copy())
        hits.append(best in top)

    cps = list(config.checkpoints)
    while cps and cps[0] == row:
        record()
        cps.pop(0)
    while row < config.T:
        try:
            a = select(config.policy, state, m, config.external).alternative
        except Exception as exc:
            raise RuntimeError(f"policy failed at step {row}: {exc}") from exc
        state.observe(a, table[row, a])
        row += 1
        while cps and cps[0] == row:
            record()
            cps.pop(0)
    return _result(np.array(selected), np.array(hits), state.counts.copy(), best)


def _result(selected, hits, counts, best) -> MacroResult:
    final_top = selected[-1]
    survivor = int(min(final_top, key=lambda i: (-counts[i], i)))
    return MacroResult(np.asarray(selected), np.asarray(hits, dtype=bool),
                       np.asarray(counts), survivor, int(best))


def _run_chunk(config: ExperimentConfig, start: int, stop: int):
    k = config.k
    hits = np.zeros(len(config.checkpoints), dtype=np.int64)
    totals = np.zeros(k, dtype=np.int64)
    surv_hist = np.zeros(k, dtype=np.int64)
    surv_counts = np.zeros((k, k), dtype=np.int64)
    for idx in range(start, stop):
        res = run_macro(config, idx)
        hits += res.correct
        totals += res.final_counts
        surv_hist[res.survivor] += 1
        surv_counts[res.survivor] += res.final_counts
    return hits, totals, surv_hist, surv_counts


def run_experiment(config: ExperimentConfig, threads: int = 1,
                   chunk_size: int = 500) -> ExperimentResult:
    """All macro replications, optionally spread over worker processes."""
    bounds = [(s, min(s + chunk_size, config.macros)) for s in range(0, config.macros, chunk_size)]
    if threads > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_run_chunk, [config] * len(bounds),
                                  [b[0] for b in bounds], [b[1] for b in bounds]))
    else:
        parts = [_run_chunk(config, a, b) for a, b in bounds]
    hits = sum(p[0] for p in parts)
    totals = sum(p[1] for p in parts)
    surv_hist = sum(p[2] for p in parts)
    surv_counts = sum(p[3] for p in parts)
    ipcs = hits / config.macros
    se = np.sqrt(ipcs * (1 - ipcs) / config.macros)
    curve = IpcsCurve(config.checkpoints, ipcs, se, config.macros)
    for t, p, e in zip(config.checkpoints, ipcs, se):
        log.info("%s m=%d T=%d ipcs=%.4f se=%.4f", config.policy.value, config.m, t, p, e)
    return ExperimentResult(config, curve, hits, totals, surv_hist, surv_counts)


RESULT_COLUMNS = ("policy", "m", "T_checkpoint", "ipcs", "std_error", "macros", "seed")
RATIO_COLUMNS = ("alternative", "mean_ratio", "conditional_ratio", "survivor",
                 "theory_ratio", "residual")


def curve_rows(result: ExperimentResult) -> list[dict]:
    cfg = result.config
    name = cfg.external if cfg.policy is PolicyKind.EXTERNAL else cfg.policy.value
    return [{"policy": name, "m": cfg.m, "T_checkpoint": t, "ipcs": float(p),
             "std_error": float(e), "macros": cfg.macros, "seed": cfg.seed}
            for t, p, e in zip(result.curve.checkpoints, result.curve.ipcs, result.curve.std_error)]


def write_csv(rows: list[dict], columns, fh: io.TextIOBase) -> None:
    writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: _fmt(row[c]) for c in columns})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v
