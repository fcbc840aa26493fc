"""Regret functionals, worst-case regret over a parameter net, cost vectors,
epsilon-efficiency certificates, and the equalizing-prior search.

Regret of a strategy at a true drift a compares its Monte Carlo expected
cost against the closed-form optimal known-a cost (the denominator carries
no Monte Carlo noise):

    additive        ECost(sigma, a) - ECost_opt(a)
    multiplicative  ECost(sigma, a) / ECost_opt(a)
    hybrid          ECost(sigma, a) / (ECost_opt(a) + gamma)

The search for a least-favorable prior runs multiplicative-weights
dynamics on the net: each round solves the Bayesian control problem for
the current prior, measures the regret profile of the resulting strategy,
and shifts weight toward high-regret points until the profile equalizes
within tolerance.  The returned certificate (equalization gap against the
stated epsilon plus propagated Monte Carlo error) is checked independently
of how the prior was found.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bellman import SolverGrid, ValueField, solve_bellman
from .errors import ConfigError
from .filtering import DiscretePrior
from .lqr import ProblemSpec, known_a_expected_cost
from .simulate import (FieldStrategy, KnownAStrategy, Partition, Strategy,
                       estimate_cost)

__all__ = [
    "RegretKind",
    "RegretValue",
    "CostVector",
    "MinimaxConfig",
    "MinimaxSolution",
    "regret",
    "regret_profile",
    "worst_case_regret",
    "cost_vector",
    "epsilon_efficiency_certificate",
    "minimax_prior_search",
    "dyadic_net",
]


@dataclass(frozen=True)
class RegretKind:
    tag: str
    gamma: float | None = None

    def __post_init__(self):
        if self.tag not in ("additive", "multiplicative", "hybrid"):
            raise ConfigError(f"unknown regret kind {self.tag!r}")
        if self.tag == "hybrid" and (self.gamma is None or self.gamma <= 0):
            raise ConfigError("hybrid regret requires gamma > 0")

    @classmethod
    def additive(cls):
        return cls("additive")

    @classmethod
    def multiplicative(cls):
        return cls("multiplicative")

    @classmethod
    def hybrid(cls, gamma: float):
        return cls("hybrid", float(gamma))


@dataclass(frozen=True)
class RegretValue:
    value: float
    std_error: float
    reliable: bool = True


def _transform(mean: float, se: float, kind: RegretKind, opt_cost: float):
    if kind.tag == "additive":
        return mean - opt_cost, se
    if kind.tag == "multiplicative":
        if opt_cost <= 0:
            raise ConfigError("multiplicative regret needs a positive optimal cost")
        return mean / opt_cost, se / opt_cost
    denom = opt_cost + kind.gamma
    return mean / denom, se / denom


def regret(strategy: Strategy, a: float, kind: RegretKind, T: float, q0: float,
           partition: Partition, n_paths: int, seed: int) -> RegretValue:
    """Monte Carlo regret of a strategy at a single drift value."""
    est = estimate_cost(strategy, a, partition, q0, n_paths, seed)
    opt = known_a_expected_cost(ProblemSpec(a, T, q0))
    value, se = _transform(est.mean, est.std_error, kind, opt)
    return RegretValue(value, se, reliable=est.reliable)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("AGNOCTL_THREADS", "1")))
    except ValueError:
        return 1


def regret_profile(strategy: Strategy, net, kind: RegretKind, T: float, q0: float,
                   partition: Partition, n_paths: int, seed: int) -> list[RegretValue]:
    """Regret at every net point, sharing the seed (common random numbers)."""
    net = np.asarray(net, dtype=float)
    if net.size == 0:
        raise ConfigError("empty net")
    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(
                lambda a: regret(strategy, float(a), kind, T, q0, partition, n_paths, seed),
                net))
    return [regret(strategy, float(a), kind, T, q0, partition, n_paths, seed) for a in net]


def worst_case_regret(strategy: Strategy, net, kind: RegretKind, T: float, q0: float,
                      partition: Partition, n_paths: int, seed: int):
    """(sup over the net, argmax set within joint 2-sigma of the sup, profile)."""
    net = np.asarray(net, dtype=float)
    profile = regret_profile(strategy, net, kind, T, q0, partition, n_paths, seed)
    values = np.array([r.value for r in profile])
    ses = np.array([r.std_error for r in profile])
    top = int(np.argmax(values))
    tied = values >= values[top] - 2.0 * np.sqrt(ses ** 2 + ses[top] ** 2)
    return float(values[top]), [float(a) for a in net[tied]], profile


@dataclass(frozen=True)
class CostVector:
    """Expected costs of one strategy over a finite net of drift values."""

    net: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray

    def __post_init__(self):
        net = np.asarray(self.net, float)
        values = np.asarray(self.values, float)
        ses = np.asarray(self.std_errors, float)
        object.__setattr__(self, "net", net)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "std_errors", ses)
        if not (net.shape == values.shape == ses.shape):
            raise ConfigError("cost vector fields must share a shape")
        if np.any(values < 0) or np.any(ses < 0):
            raise ConfigError("cost vector entries must be nonnegative")


def cost_vector(strategy: Strategy, net, partition: Partition, q0: float,
                n_paths: int, seed: int) -> CostVector:
    net = np.asarray(net, dtype=float)
    ests = [estimate_cost(strategy, float(a), partition, q0, n_paths, seed) for a in net]
    return CostVector(net, np.array([e.mean for e in ests]),
                      np.array([e.std_error for e in ests]))


def epsilon_efficiency_certificate(candidate: CostVector, challengers, eps: float) -> str:
    """"violated" if some challenger beats the candidate by more than eps at
    every net point (each comparison at joint 2-sigma); else "unfalsified"."""
    for ch in challengers:
        if not np.array_equal(ch.net, candidate.net):
            raise ConfigError("cost vectors must share the net")
        margin = candidate.values - ch.values
        tol = 2.0 * np.sqrt(candidate.std_errors ** 2 + ch.std_errors ** 2)
        if np.all(margin > eps + tol):
            return "violated"
    return "unfalsified"


def dyadic_net(a_max: float, n: int) -> np.ndarray:
    """Net A_n = [-a_max, a_max] intersected with 2^-n Z."""
    step = 2.0 ** (-n)
    k = math.floor(a_max / step)
    return np.arange(-k, k + 1) * step


@dataclass
class MinimaxConfig:
    epsilon: float = 0.05
    max_rounds: int = 30
    grid: SolverGrid | None = None
    n_paths: int = 20000
    dt: float = 5e-3
    seed: int = 1234
    weight_floor: float = 1e-4
    c_tame: float | None = None


@dataclass
class MinimaxSolution:
    """Equalizing prior, its Bayes strategy, and the regret certificate."""

    net: np.ndarray
    support: np.ndarray
    prior: DiscretePrior
    field: ValueField | None
    regret_values: np.ndarray
    regret_stderrs: np.ndarray
    sup_regret: float
    equalization_gap: float
    certified: bool
    rounds: int
    horizon: float = 1.0

    @property
    def strategy(self) -> Strategy:
        if self.field is None:
            return KnownAStrategy(float(self.support[0]), self.horizon)
        return FieldStrategy(self.field)

    def report(self) -> str:
        lines = [
            f"certified: {self.certified}",
            f"rounds: {self.rounds}",
            f"sup_regret: {self.sup_regret!r}",
            f"equalization_gap: {self.equalization_gap!r}",
            "support: " + " ".join(repr(float(a)) for a in self.support),
            "prior: " + " ".join(f"({float(a)!r}, {float(p)!r})"
                                 for a, p in zip(self.prior.atoms, self.prior.weights)),
        ]
        lines.append("profile:")
        for a, r, s in zip(self.net, self.regret_values, self.regret_stderrs):
            lines.append(f"  a={float(a)!r} regret={float(r)!r} stderr={float(s)!r}")
        return "\n".join(lines) + "\n"

    def csv_rows(self):
        for a, r, s in zip(self.net, self.regret_values, self.regret_stderrs):
            yield float(a), float(r), float(s)


def _profile_arrays(profile):
    return (np.array([r.value for r in profile]),
            np.array([r.std_error for r in profile]))


def minimax_prior_search(net, kind: RegretKind, T: float, q0: float,
                         config: MinimaxConfig) -> MinimaxSolution:
    """Search for the prior whose Bayes-optimal strategy equalizes regret.

    Multiplicative-weights loop over the net: weight of each point is
    scaled by exp(eta (regret - mean regret)) each round; atoms below the
    weight floor are dropped from the solved prior but keep being updated,
    so they can re-enter if their regret rises.  Stops when the gap between
    the max regret on the net and the min regret on the support is at most
    epsilon plus the propagated 2-sigma Monte Carlo tolerance.
    """
    net = np.unique(np.asarray(net, dtype=float))
    if net.size == 0:
        raise ConfigError("empty net")
    a_max = max(1e-12, float(np.max(np.abs(net))))
    partition = Partition.from_dt(T, config.dt)

    if net.size == 1:
        a0 = float(net[0])
        prior = DiscretePrior.point_mass(a0)
        strat = KnownAStrategy(a0, T)
        prof = regret_profile(strat, net, kind, T, q0, partition,
                              config.n_paths, config.seed)
        values, ses = _profile_arrays(prof)
        sol = MinimaxSolution(net=net, support=net.copy(), prior=prior, field=None,
                              regret_values=values, regret_stderrs=ses,
                              sup_regret=float(values[0]), equalization_gap=0.0,
                              certified=True, rounds=0, horizon=T)
        return sol

    if config.grid is None:
        raise ConfigError("minimax search needs a solver grid for nets with >1 point")

    weights = np.full(net.size, 1.0 / net.size)
    best = None
    prev_gap = math.inf
    eta_scale = 1.0

    for round_idx in range(1, config.max_rounds + 1):
        active = weights >= config.weight_floor
        if not np.any(active):
            active = weights == weights.max()
        prior = DiscretePrior(net[active], weights[active] / weights[active].sum(),
                              a_max=max(1.0, a_max))
        fld = solve_bellman(prior, config.grid, c_tame=config.c_tame)
        strat = FieldStrategy(fld)
        prof = regret_profile(strat, net, kind, T, q0, partition,
                              config.n_paths, config.seed)
        values, ses = _profile_arrays(prof)

        sup = float(values.max())
        support_min = float(values[active].min())
        gap = sup - support_min
        i_max = int(np.argmax(values))
        act_idx = np.where(active)[0]
        i_min = int(act_idx[np.argmin(values[active])])
        stat_tol = 2.0 * math.sqrt(ses[i_max] ** 2 + ses[i_min] ** 2)
        certified = gap <= config.epsilon + stat_tol

        candidate = MinimaxSolution(
            net=net, support=net[active].copy(), prior=prior, field=fld,
            regret_values=values, regret_stderrs=ses, sup_regret=sup,
            equalization_gap=gap, certified=certified, rounds=round_idx, horizon=T)
        if best is None or gap < best.equalization_gap:
            best = candidate
        if certified:
            return candidate

        if gap > prev_gap:
            eta_scale *= 0.5
        prev_gap = gap
        spread = max(float(values.max() - values.min()), 1e-12)
        eta = eta_scale * 0.5 / spread
        weights = weights * np.exp(eta * (values - values.mean()))
        weights = weights / weights.sum()

    return best
