"""Euler-Maruyama execution of partition strategies and Monte Carlo costs.

Strategies are evaluated in batch: the control method receives arrays of
per-path positions and sufficient statistics and returns an array of
controls.  All randomness is drawn from counter-based Philox generators
keyed on the master seed, so a fixed (strategy, a, partition, q0, n, seed)
tuple reproduces bit-exact results and different strategies compared under
the same seed share noise (common random numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .filtering import DiscretePrior, SufficientStats, posterior_mean_grid
from .lqr import riccati_gain

__all__ = [
    "Partition",
    "Strategy",
    "KnownAStrategy",
    "CertaintyEquivalentStrategy",
    "FieldStrategy",
    "MixedStrategy",
    "ClampedStrategy",
    "FunctionStrategy",
    "ZeroStrategy",
    "TrajectorySample",
    "CostEstimate",
    "BatchResult",
    "run_batch",
    "simulate_path",
    "estimate_cost",
    "path_costs",
    "estimate_cost_under_prior",
    "mix",
    "tame_clamp",
]

BLOWUP_THRESHOLD = 1e12


@dataclass(frozen=True)
class Partition:
    """Strictly increasing time grid t_0 = 0 < ... < t_N = T."""

    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("partition needs at least two times")
        if times[0] != 0.0:
            raise ValueError("partition must start at 0")
        if not np.all(np.diff(times) > 0):
            raise ValueError("partition times must be strictly increasing")

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @classmethod
    def uniform(cls, T: float, n_steps: int) -> "Partition":
        return cls(np.linspace(0.0, T, n_steps + 1))

    @classmethod
    def from_dt(cls, T: float, dt: float) -> "Partition":
        n = max(1, int(round(T / dt)))
        return cls(np.linspace(0.0, T, n + 1))


class Strategy:
    """Base class: a rule mapping (q, t, zeta1, zeta2, coin flips) -> u.

    init_state draws any coin flips for a batch of paths and allocates
    per-path mutable state; control is a pure function of (state, inputs)
    except for bookkeeping writes into state (clamp counts, switch flags).
    """

    def init_state(self, n_paths: int, coin_rng: np.random.Generator) -> dict:
        return {}

    def control(self, state: dict, q: np.ndarray, t: float,
                zeta1: np.ndarray, zeta2: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ZeroStrategy(Strategy):
    def control(self, state, q, t, zeta1, zeta2):
        return np.zeros_like(q)


class FunctionStrategy(Strategy):
    """Wrap a vectorized callable u = f(q, t, zeta1, zeta2)."""

    def __init__(self, fn):
        self.fn = fn

    def control(self, state, q, t, zeta1, zeta2):
        return np.broadcast_to(np.asarray(self.fn(q, t, zeta1, zeta2), float), q.shape).copy()


class KnownAStrategy(Strategy):
    """Optimal strategy for a known drift: u = -kappa(T - t, a) q."""

    def __init__(self, a: float, T: float):
        self.a = float(a)
        self.T = float(T)

    def control(self, state, q, t, zeta1, zeta2):
        return -riccati_gain(max(self.T - t, 0.0), self.a) * q


class CertaintyEquivalentStrategy(Strategy):
    """Plug the posterior mean into the known-a gain: u = -kappa(T-t, abar) q."""

    def __init__(self, prior: DiscretePrior, T: float):
        self.prior = prior
        self.T = float(T)

    def control(self, state, q, t, zeta1, zeta2):
        abar = posterior_mean_grid(self.prior, zeta1, zeta2)
        return -riccati_gain(max(self.T - t, 0.0), abar) * q


class FieldStrategy(Strategy):
    """Control read from a solved value field via multilinear interpolation.

    Any object exposing control_at(q, t, zeta1, zeta2) and a horizon T works.
    """

    def __init__(self, field):
        self.field = field
        self.T = float(field.T)

    def control(self, state, q, t, zeta1, zeta2):
        return self.field.control_at(q, t, zeta1, zeta2)


class MixedStrategy(Strategy):
    """One coin flip at t = 0 selects right with probability theta, else left."""

    def __init__(self, left: Strategy, right: Strategy, theta: float):
        if not 0.0 <= theta <= 1.0:
            raise ValueError(f"mixing probability must be in [0, 1], got {theta}")
        self.left = left
        self.right = right
        self.theta = float(theta)

    def init_state(self, n_paths, coin_rng):
        pick_right = coin_rng.random(n_paths) < self.theta
        return {
            "pick_right": pick_right,
            "left": self.left.init_state(n_paths, coin_rng),
            "right": self.right.init_state(n_paths, coin_rng),
        }

    def control(self, state, q, t, zeta1, zeta2):
        u_l = self.left.control(state["left"], q, t, zeta1, zeta2)
        u_r = self.right.control(state["right"], q, t, zeta1, zeta2)
        return np.where(state["pick_right"], u_r, u_l)


class ClampedStrategy(Strategy):
    """Clamp the inner control to the tame envelope |u| <= C (1 + |q|)."""

    def __init__(self, inner: Strategy, c_tame: float):
        if c_tame <= 0:
            raise ValueError("tame constant must be positive")
        self.inner = inner
        self.c_tame = float(c_tame)

    def init_state(self, n_paths, coin_rng):
        return {"inner": self.inner.init_state(n_paths, coin_rng),
                "clamp_events": np.zeros(n_paths, dtype=np.int64)}

    def control(self, state, q, t, zeta1, zeta2):
        u = self.inner.control(state["inner"], q, t, zeta1, zeta2)
        env = self.c_tame * (1.0 + np.abs(q))
        clipped = np.clip(u, -env, env)
        state["clamp_events"] += (clipped != u)
        return clipped


def mix(left: Strategy, right: Strategy, theta: float) -> MixedStrategy:
    return MixedStrategy(left, right, theta)


def tame_clamp(inner: Strategy, c_tame: float) -> ClampedStrategy:
    return ClampedStrategy(inner, c_tame)


@dataclass
class TrajectorySample:
    """One realized path at the partition times."""

    times: np.ndarray
    q_path: np.ndarray
    u_path: np.ndarray
    zeta1_path: np.ndarray
    zeta2_path: np.ndarray
    cost: float
    clamp_events: int
    blew_up: bool
    events: dict = field(default_factory=dict)


@dataclass
class BatchResult:
    """Vectorized outcome of n independent paths under one (strategy, a)."""

    costs: np.ndarray          # (n,), NaN where the path blew up
    zeta1: np.ndarray          # final stats
    zeta2: np.ndarray
    blew_up: np.ndarray        # (n,) bool
    clamp_events: int
    events: dict

    @property
    def blowup_fraction(self) -> float:
        return float(np.mean(self.blew_up))


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int
    blowup_fraction: float = 0.0

    @property
    def reliable(self) -> bool:
        return self.blowup_fraction == 0.0


def _rngs(seed: int):
    ss = np.random.SeedSequence(seed)
    noise_ss, coin_ss = ss.spawn(2)
    return (np.random.Generator(np.random.Philox(noise_ss)),
            np.random.Generator(np.random.Philox(coin_ss)))


def _collect_clamp_events(state: dict) -> int:
    total = 0
    for key, val in state.items():
        if key == "clamp_events":
            total += int(np.sum(val))
        elif isinstance(val, dict):
            total += _collect_clamp_events(val)
    return total


def _collect_events(state: dict) -> dict:
    events = {}
    for key, val in state.items():
        if isinstance(val, dict):
            events.update(_collect_events(val))
        elif key.startswith("event_"):
            events[key[len("event_"):]] = val
    return events


def run_batch(strategy: Strategy, a: float, partition: Partition, q0: float,
              n_paths: int, seed: int, record: bool = False) -> BatchResult | TrajectorySample:
    """Simulate n_paths Euler-Maruyama paths of dq = (a q + u) dt + dW.

    The control is held constant on each partition interval; cost and the
    sufficient statistics use left-endpoint (Ito) quadrature.  Paths whose
    position exceeds BLOWUP_THRESHOLD are frozen and their cost set to NaN.
    With record=True, n_paths must be 1 and a TrajectorySample is returned.
    """
    if record and n_paths != 1:
        raise ValueError("record=True requires a single path")
    noise_rng, coin_rng = _rngs(seed)
    state = strategy.init_state(n_paths, coin_rng)

    times = partition.times
    n_steps = partition.n_steps
    q = np.full(n_paths, float(q0))
    z1 = np.zeros(n_paths)
    z2 = np.zeros(n_paths)
    cost = np.zeros(n_paths)
    frozen = np.zeros(n_paths, dtype=bool)

    if record:
        q_path = np.empty(n_steps + 1)
        u_path = np.empty(n_steps)
        z1_path = np.empty(n_steps + 1)
        z2_path = np.empty(n_steps + 1)
        q_path[0], z1_path[0], z2_path[0] = q[0], 0.0, 0.0

    for nu in range(n_steps):
        t = times[nu]
        dt = times[nu + 1] - times[nu]
        u = strategy.control(state, q, t, z1, z2)
        u = np.where(frozen, 0.0, u)
        cost += np.where(frozen, 0.0, (q * q + u * u) * dt)
        xi = noise_rng.standard_normal(n_paths)
        dq = (a * q + u) * dt + math.sqrt(dt) * xi
        live = ~frozen
        z1 += np.where(live, q * (dq - u * dt), 0.0)
        z2 += np.where(live, q * q * dt, 0.0)
        q = np.where(live, q + dq, q)
        newly = live & (np.abs(q) > BLOWUP_THRESHOLD)
        frozen |= newly
        if record:
            u_path[nu] = u[0]
            q_path[nu + 1], z1_path[nu + 1], z2_path[nu + 1] = q[0], z1[0], z2[0]

    cost = np.where(frozen, np.nan, cost)
    clamp_events = _collect_clamp_events(state)
    events = _collect_events(state)

    if record:
        return TrajectorySample(
            times=times.copy(), q_path=q_path, u_path=u_path,
            zeta1_path=z1_path, zeta2_path=z2_path,
            cost=float(cost[0]), clamp_events=clamp_events,
            blew_up=bool(frozen[0]),
            events={k: np.asarray(v).copy() for k, v in events.items()},
        )
    return BatchResult(costs=cost, zeta1=z1, zeta2=z2, blew_up=frozen,
                       clamp_events=clamp_events, events=events)


def simulate_path(strategy: Strategy, a: float, partition: Partition,
                  q0: float, seed: int) -> TrajectorySample:
    return run_batch(strategy, a, partition, q0, 1, seed, record=True)


def path_costs(strategy: Strategy, a: float, partition: Partition, q0: float,
               n_paths: int, seed: int) -> np.ndarray:
    """Per-path realized costs (NaN on blow-up); basis for paired comparisons."""
    return run_batch(strategy, a, partition, q0, n_paths, seed).costs


def _estimate_from_costs(costs: np.ndarray, seed: int) -> CostEstimate:
    n = costs.size
    good = costs[~np.isnan(costs)]
    blowup_fraction = 1.0 - good.size / n
    if good.size < 2:
        return CostEstimate(math.nan, math.nan, n, seed, blowup_fraction)
    return CostEstimate(
        mean=float(good.mean()),
        std_error=float(good.std(ddof=1) / math.sqrt(good.size)),
        n_paths=n, seed=seed, blowup_fraction=blowup_fraction,
    )


def estimate_cost(strategy: Strategy, a: float, partition: Partition, q0: float,
                  n_paths: int, seed: int) -> CostEstimate:
    """Monte Carlo expected cost of a strategy at a fixed true drift a."""
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    return _estimate_from_costs(path_costs(strategy, a, partition, q0, n_paths, seed), seed)


def estimate_cost_under_prior(strategy: Strategy, prior: DiscretePrior,
                              partition: Partition, q0: float,
                              n_paths: int, seed: int) -> CostEstimate:
    """Prior-weighted expected cost with common random numbers across atoms.

    Each atom reuses the same noise (same seed), so the per-path weighted
    average is itself a path functional and its standard error reflects the
    coupled comparison.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    combined = np.zeros(n_paths)
    for a, p in zip(prior.atoms, prior.weights):
        combined += p * path_costs(strategy, float(a), partition, q0, n_paths, seed)
    return _estimate_from_costs(combined, seed)
