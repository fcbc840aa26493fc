"""Closed-form optimal control for the scalar system dq = (a q + u) dt + dW
with known drift parameter a and running cost q^2 + u^2.

The optimal feedback is u(t) = -kappa(T - t, a) q(t) with

    kappa(s, a) = tanh(s r) / (r - a tanh(s r)),   r = sqrt(a^2 + 1).

The denominator is strictly positive for every real a and s >= 0 because
tanh < 1 and r > a.  The expected cost of the optimal strategy from q0 over
horizon T is kappa(T, a) q0^2 + int_0^T kappa(s, a) ds (standard LQ value
identity; the constant term collects the noise contribution).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

__all__ = [
    "ProblemSpec",
    "riccati_gain",
    "known_a_control",
    "known_a_expected_cost",
    "gain_bound",
]


@dataclass(frozen=True)
class ProblemSpec:
    """Known-parameter problem instance: drift a, horizon T, start q0."""

    a: float
    T: float
    q0: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.T) and math.isfinite(self.q0)):
            raise ValueError("ProblemSpec fields must be finite")
        if self.T <= 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")


def riccati_gain(s, a):
    """Optimal feedback gain kappa(s, a) for remaining horizon s.

    Accepts scalars or numpy arrays (broadcast).  kappa >= 0, kappa(0, a) = 0,
    and kappa is nondecreasing in s.  For large s the gain saturates at
    1 / (r - a) = r + a with r = sqrt(a^2 + 1).
    """
    s_arr = np.asarray(s, dtype=float)
    a_arr = np.asarray(a, dtype=float)
    scalar = s_arr.ndim == 0 and a_arr.ndim == 0
    if scalar:
        if not (math.isfinite(float(s_arr)) and math.isfinite(float(a_arr))):
            raise ValueError("riccati_gain requires finite inputs")
        if float(s_arr) < 0:
            raise ValueError(f"remaining horizon must be nonnegative, got {s}")
    r = np.sqrt(a_arr * a_arr + 1.0)
    # tanh saturates cleanly for large arguments; no overflow possible.
    th = np.tanh(s_arr * r)
    kappa = th / (r - a_arr * th)
    if scalar:
        return float(kappa)
    return kappa


def gain_bound(a) -> float:
    """Assertable envelope for the known-a control: |u| <= 3 max(|a|, 1) |q|.

    Follows from kappa(s, a) <= sqrt(a^2 + 1) + |a| <= 3 max(|a|, 1).
    """
    return 3.0 * max(abs(float(a)), 1.0)


def known_a_control(q: float, t: float, spec: ProblemSpec) -> float:
    """Optimal known-a control u = -kappa(T - t, a) q at time t in [0, T]."""
    if not 0.0 <= t <= spec.T:
        raise ValueError(f"t={t} outside [0, {spec.T}]")
    u = -riccati_gain(spec.T - t, spec.a) * q
    assert abs(u) <= gain_bound(spec.a) * abs(q) + 1e-12
    return u


def known_a_expected_cost(spec: ProblemSpec) -> float:
    """Expected cost of the optimal known-a strategy: kappa(T,a) q0^2 + int kappa.

    The integral is evaluated by adaptive quadrature to relative error 1e-10.
    """
    head = riccati_gain(spec.T, spec.a) * spec.q0 ** 2
    tail, _ = quad(lambda s: riccati_gain(s, spec.a), 0.0, spec.T,
                   epsabs=1e-12, epsrel=1e-10, limit=200)
    return head + tail
