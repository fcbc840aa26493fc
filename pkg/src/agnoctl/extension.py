"""Extend a bounded-interval strategy to arbitrary real drift values.

The wrapper runs the inner strategy (clamped to the growth envelope
|u| <= C0 (1 + a_max^n0)(1 + |q|)) while the running confidence interval
for the drift, a_hat +/- confidence_c / sqrt(zeta2) with a_hat = zeta1 /
zeta2, still intersects [-(1+eps) a_max, (1+eps) a_max].  Once the
interval separates from the (hysteresis-widened) interval, the path
switches permanently to certainty-equivalent control
u = -kappa(T - t, a_hat) q with a_hat re-estimated each step through a
small ridge, zeta1 / (zeta2 + ridge), which keeps the early estimate from
exploding while zeta2 is still tiny.

The wrapper works with any inner strategy, but pairing it with an
over-stabilized interval controller (robust_interval_strategy) keeps paths
with a large true drift from amplifying before detection: a gain sized for
several times a_max holds |q| roughly flat at a = 4 while the estimate
sharpens, so a late switch is cheap, and inside the interval the extra
control effort is modest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .filtering import SufficientStats
from .lqr import riccati_gain
from .simulate import Strategy

__all__ = ["ExtensionParams", "running_drift_estimate", "ExtendedStrategy",
           "extend_strategy", "robust_interval_strategy"]


@dataclass(frozen=True)
class ExtensionParams:
    a_max: float
    eps: float
    confidence_c: float = 3.0
    n0: int = 1
    C0: float = 3.0
    hysteresis_margin: float | None = None
    ridge: float = 0.025
    zeta2_min: float = 0.03  # information gate before the switch test runs

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("eps must be in (0, 1)")
        if self.a_max <= 0 or self.confidence_c <= 0 or self.C0 <= 0:
            raise ValueError("a_max, confidence_c, C0 must be positive")
        if self.hysteresis_margin is None:
            object.__setattr__(self, "hysteresis_margin", 0.1 * self.a_max)

    @property
    def envelope_constant(self) -> float:
        return self.C0 * (1.0 + self.a_max ** self.n0)

    @property
    def switch_boundary(self) -> float:
        return (1.0 + self.eps) * self.a_max + self.hysteresis_margin


def running_drift_estimate(stats: SufficientStats, confidence_c: float = 3.0):
    """Maximum-likelihood drift estimate with confidence half-width.

    Returns (zeta1 / zeta2, confidence_c / sqrt(zeta2)); (0, inf) when no
    information has accumulated yet.
    """
    if stats.zeta2 == 0.0:
        return 0.0, math.inf
    return stats.zeta1 / stats.zeta2, confidence_c / math.sqrt(stats.zeta2)


class ExtendedStrategy(Strategy):
    """Permanent-switch wrapper around a bounded-interval strategy."""

    def __init__(self, inner: Strategy, params: ExtensionParams, T: float):
        self.inner = inner
        self.params = params
        self.T = float(T)

    def init_state(self, n_paths, coin_rng):
        return {
            "inner": self.inner.init_state(n_paths, coin_rng),
            "switched": np.zeros(n_paths, dtype=bool),
            "event_switched_at": np.full(n_paths, np.nan),
            "event_switch_count": np.zeros(n_paths, dtype=np.int64),
        }

    def control(self, state, q, t, zeta1, zeta2):
        p = self.params
        switched = state["switched"]

        with np.errstate(divide="ignore", invalid="ignore"):
            a_hat = np.where(zeta2 > 0, zeta1 / np.maximum(zeta2, 1e-300), 0.0)
            half_width = np.where(zeta2 > 0,
                                  p.confidence_c / np.sqrt(np.maximum(zeta2, 1e-300)),
                                  np.inf)
        separated = (zeta2 >= p.zeta2_min) & (np.abs(a_hat) - half_width > p.switch_boundary)
        newly = separated & ~switched
        switched |= newly
        state["event_switched_at"] = np.where(newly, t, state["event_switched_at"])
        state["event_switch_count"] += newly

        u_in = self.inner.control(state["inner"], q, t, zeta1, zeta2)
        env = p.envelope_constant * (1.0 + np.abs(q))
        u_in = np.clip(u_in, -env, env)

        a_ctrl = zeta1 / (zeta2 + p.ridge)
        u_sw = -riccati_gain(max(self.T - t, 0.0), a_ctrl) * q
        return np.where(switched, u_sw, u_in)


def extend_strategy(inner: Strategy, params: ExtensionParams, T: float) -> ExtendedStrategy:
    return ExtendedStrategy(inner, params, T)


class _RobustIntervalStrategy(Strategy):
    def __init__(self, a_max: float, T: float, gain_margin: float):
        self.a_max = float(a_max)
        self.T = float(T)
        self.gain_margin = float(gain_margin)

    def control(self, state, q, t, zeta1, zeta2):
        s = max(self.T - t, 0.0)
        return -riccati_gain(s, self.gain_margin * self.a_max) * q


def robust_interval_strategy(a_max: float, T: float, gain_margin: float = 3.0) -> Strategy:
    """Over-stabilized controller for drift anywhere in [-a_max, a_max].

    Plays u = -kappa(T - t, gain_margin * a_max) q, the optimal feedback
    for a drift gain_margin times the interval edge.  Deliberately
    conservative: the extra gain costs little inside the interval and keeps
    the state from running away while an out-of-interval drift is still
    being detected, which is what makes it a good inner strategy for
    ExtendedStrategy.
    """
    if a_max <= 0 or gain_margin < 1:
        raise ValueError("a_max must be positive and gain_margin >= 1")
    return _RobustIntervalStrategy(a_max, T, gain_margin)
