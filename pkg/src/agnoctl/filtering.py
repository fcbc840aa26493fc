"""Sufficient statistics and posterior inference for the unknown drift a.

Along a controlled path, the pair

    zeta1(t) = int_0^t q (dq - u dt)      (Ito / left-endpoint discretization)
    zeta2(t) = int_0^t q^2 ds >= 0

determines the posterior over a for any prior: the Girsanov likelihood of a
given the path is proportional to exp(-(a^2/2) zeta2 + a zeta1).  Priors are
finitely supported; posteriors are computed in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

__all__ = ["DiscretePrior", "SufficientStats", "Posterior", "update_stats", "posterior", "posterior_mean_grid"]

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class DiscretePrior:
    """Finitely supported probability measure on [-a_max, a_max].

    atoms: strictly increasing locations; weights: nonnegative, sum to 1.
    """

    atoms: np.ndarray
    weights: np.ndarray
    a_max: float

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        if atoms.ndim != 1 or atoms.size == 0 or atoms.shape != weights.shape:
            raise ValueError("atoms and weights must be matching nonempty 1-d arrays")
        if not np.all(np.diff(atoms) > 0):
            raise ValueError("atom locations must be strictly increasing")
        if self.a_max <= 0:
            raise ValueError("a_max must be positive")
        if np.any(np.abs(atoms) > self.a_max + 1e-12):
            raise ValueError("atoms must lie in [-a_max, a_max]")
        if np.any(weights < -_WEIGHT_TOL) or abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError("weights must be nonnegative and sum to 1")

    @classmethod
    def point_mass(cls, a: float, a_max: float | None = None) -> "DiscretePrior":
        return cls(np.array([a]), np.array([1.0]), a_max if a_max is not None else max(abs(a), 1.0))

    @classmethod
    def from_pairs(cls, pairs, a_max: float | None = None) -> "DiscretePrior":
        """Build from (a, p) pairs; normalizes weights and sorts atoms."""
        arr = sorted((float(a), float(p)) for a, p in pairs)
        atoms = np.array([a for a, _ in arr])
        weights = np.array([p for _, p in arr])
        weights = weights / weights.sum()
        if a_max is None:
            a_max = max(1.0, float(np.max(np.abs(atoms))))
        return cls(atoms, weights, a_max)

    @classmethod
    def uniform(cls, atoms, a_max: float | None = None) -> "DiscretePrior":
        atoms = list(atoms)
        return cls.from_pairs([(a, 1.0 / len(atoms)) for a in atoms], a_max)

    def to_text(self) -> str:
        """Serialize as one "a p" pair per line (CLI exchange format)."""
        return "".join(f"{float(a)!r} {float(p)!r}\n"
                       for a, p in zip(self.atoms, self.weights))

    @classmethod
    def from_text(cls, text: str, a_max: float | None = None) -> "DiscretePrior":
        pairs = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            a_str, p_str = line.split()
            pairs.append((float(a_str), float(p_str)))
        if not pairs:
            raise ValueError("empty prior text")
        return cls.from_pairs(pairs, a_max)


@dataclass(frozen=True)
class SufficientStats:
    """Path summary (zeta1, zeta2); zeta2 is nonnegative and nondecreasing."""

    zeta1: float = 0.0
    zeta2: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.zeta1) and math.isfinite(self.zeta2)):
            raise ValueError("sufficient statistics must be finite")
        if self.zeta2 < 0:
            raise ValueError("zeta2 must be nonnegative")


@dataclass(frozen=True)
class Posterior:
    atoms: np.ndarray
    weights: np.ndarray
    mean: float


def update_stats(stats: SufficientStats, q: float, u: float, dq: float, dt: float) -> SufficientStats:
    """One Ito (left-endpoint) increment of the sufficient statistics."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return SufficientStats(
        zeta1=stats.zeta1 + q * (dq - u * dt),
        zeta2=stats.zeta2 + q * q * dt,
    )


def _log_weights(prior: DiscretePrior, zeta1, zeta2):
    a = prior.atoms
    with np.errstate(divide="ignore"):
        logp = np.log(prior.weights)
    return -0.5 * a * a * np.asarray(zeta2)[..., None] + a * np.asarray(zeta1)[..., None] + logp


def posterior(prior: DiscretePrior, stats: SufficientStats) -> Posterior:
    """Posterior over the prior atoms given (zeta1, zeta2), in log space."""
    lw = _log_weights(prior, stats.zeta1, stats.zeta2)
    lw = lw - logsumexp(lw)
    w = np.exp(lw)
    mean = float(np.dot(w, prior.atoms))
    return Posterior(atoms=prior.atoms.copy(), weights=w, mean=mean)


def posterior_mean_grid(prior: DiscretePrior, zeta1, zeta2) -> np.ndarray:
    """Posterior mean a-bar evaluated on broadcastable arrays of (zeta1, zeta2).

    Returns an array of the broadcast shape; used to precompute the drift
    field on the solver's (zeta1, zeta2) grid.
    """
    z1, z2 = np.broadcast_arrays(np.asarray(zeta1, float), np.asarray(zeta2, float))
    lw = _log_weights(prior, z1, z2)
    lw = lw - np.max(lw, axis=-1, keepdims=True)
    w = np.exp(lw)
    return np.einsum("...k,k->...", w, prior.atoms) / w.sum(axis=-1)
