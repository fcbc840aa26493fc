"""Backward-in-time solve of the value PDE for optimal Bayesian control.

The cost-to-go S(q, t, zeta1, zeta2) satisfies

    0 = S_t + (abar q + u) S_q + abar q^2 S_z1 + q^2 S_z2
        + 1/2 S_qq + q S_qz1 + 1/2 q^2 S_z1z1 + q^2 + u^2,

with u = -1/2 S_q, terminal condition S = 0 at t = T, and S >= 0, where
abar(zeta1, zeta2) is the posterior mean of the drift under the prior.

Scheme: explicit first order in time; central second differences for the
(degenerate, rank-1) diffusion block including the 4-point cross stencil;
first-order upwind differences for the three transport terms.  The control
is substituted from the central q-derivative of the previous slice and
clamped to the tame envelope |u| <= C_TAME (1 + |q|).  Boundary handling:
linear extrapolation (zero second normal derivative) at the q and zeta1
faces, zero normal derivative at zeta2 = Z2; zeta2 = 0 needs no condition
because the zeta2 transport velocity q^2 is nonnegative (characteristics
flow inward) and the scheme is one-sided there.

Internal time steps obey an explicit CFL bound; the stored t axis is the
coarser user-requested one.  When the posterior mean does not vary with
zeta2 (e.g. all prior atoms share one |a|), S is zeta2-independent and the
solve optionally collapses to a single zeta2 slice broadcast at storage.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError, FieldIOError
from .filtering import DiscretePrior, SufficientStats, posterior_mean_grid
from .interp import multilinear

__all__ = [
    "SolverGrid",
    "ValueField",
    "posterior_drift",
    "solve_bellman",
    "default_c_tame",
]

SCHEME_VERSION = 1
_MAGIC = b"AGNOFLD1"


def posterior_drift(prior: DiscretePrior, zeta1: float, zeta2: float) -> float:
    """Posterior mean of the drift given the sufficient statistics."""
    return float(posterior_mean_grid(prior, zeta1, zeta2))


def default_c_tame(a_max: float) -> float:
    """Default tame constant; covers the known-a gain for |a| <= a_max."""
    return 3.0 * max(1.0, float(a_max))


@dataclass(frozen=True)
class SolverGrid:
    """Truncated uniform grid: q in [-Q, Q], zeta1 in [-Z1, Z1], zeta2 in [0, Z2],
    stored times t in [0, T].  Internal stepping subdivides the t intervals
    to meet the explicit stability bound."""

    q_axis: np.ndarray
    zeta1_axis: np.ndarray
    zeta2_axis: np.ndarray
    t_axis: np.ndarray

    def __post_init__(self):
        for name in ("q_axis", "zeta1_axis", "zeta2_axis", "t_axis"):
            ax = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, ax)
            if ax.ndim != 1 or ax.size < 2:
                raise ConfigError(f"{name} needs at least 2 points")
            if not np.all(np.diff(ax) > 0):
                raise ConfigError(f"{name} must be strictly increasing")
        if self.t_axis[0] != 0.0:
            raise ConfigError("t axis must start at 0")
        if self.zeta2_axis[0] != 0.0:
            raise ConfigError("zeta2 axis must start at 0")

    @classmethod
    def create(cls, Q: float, Z1: float, Z2: float, T: float,
               n_q: int, n_z1: int, n_z2: int, n_t: int) -> "SolverGrid":
        if min(Q, Z1, Z2, T) <= 0:
            raise ConfigError("grid bounds must be positive")
        return cls(
            q_axis=np.linspace(-Q, Q, n_q),
            zeta1_axis=np.linspace(-Z1, Z1, n_z1),
            zeta2_axis=np.linspace(0.0, Z2, n_z2),
            t_axis=np.linspace(0.0, T, n_t),
        )

    @property
    def T(self) -> float:
        return float(self.t_axis[-1])

    @property
    def Q(self) -> float:
        return float(self.q_axis[-1])

    def spacings(self):
        return (float(self.q_axis[1] - self.q_axis[0]),
                float(self.zeta1_axis[1] - self.zeta1_axis[0]),
                float(self.zeta2_axis[1] - self.zeta2_axis[0]))

    def cfl_dt(self, a_max: float, c_tame: float) -> float:
        """Largest explicit time step allowed by diffusion + transport bounds."""
        dq, dz1, dz2 = self.spacings()
        Q = self.Q
        v_q = a_max * Q + c_tame * (1.0 + Q)
        v_z1 = a_max * Q * Q
        v_z2 = Q * Q
        denom = (1.0 / dq ** 2 + Q * Q / dz1 ** 2 + Q / (dq * dz1)
                 + v_q / dq + v_z1 / dz1 + v_z2 / dz2)
        return 1.0 / denom


def _sl(ndim, axis, s):
    idx = [slice(None)] * ndim
    idx[axis] = s
    return tuple(idx)


def _upwind(S, v, h, axis):
    """First-order upwind derivative of S along axis for velocity v."""
    if S.shape[axis] == 1:
        return np.zeros_like(S)
    d = np.diff(S, axis=axis) / h
    last = _sl(S.ndim, axis, slice(-1, None))
    first = _sl(S.ndim, axis, slice(0, 1))
    fwd = np.concatenate([d, d[last]], axis=axis)
    bwd = np.concatenate([d[first], d], axis=axis)
    return np.where(v >= 0, fwd, bwd)


def _second(S, h, axis):
    """Central second difference; zero on the two boundary planes."""
    out = np.zeros_like(S)
    if S.shape[axis] < 3:
        return out
    n = S.ndim
    core = _sl(n, axis, slice(1, -1))
    up = _sl(n, axis, slice(2, None))
    dn = _sl(n, axis, slice(None, -2))
    out[core] = (S[up] - 2.0 * S[core] + S[dn]) / (h * h)
    return out


@dataclass
class ValueField:
    """Solved cost-to-go S and control U on the grid.

    Array layout is (t, q, zeta1, zeta2); S(., t=T, ., .) = 0 and S >= 0
    everywhere; |U| <= c_tame (1 + |q|) at every node.
    """

    grid: SolverGrid
    prior: DiscretePrior
    S: np.ndarray
    U: np.ndarray
    c_tame: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return self.grid.T

    def _axes(self):
        g = self.grid
        return [g.t_axis, g.q_axis, g.zeta1_axis, g.zeta2_axis]

    def value_at(self, q, t, zeta1, zeta2):
        """Multilinear interpolation of S; out-of-domain queries clamp."""
        return multilinear(self._axes(), self.S, [t, q, zeta1, zeta2])

    def control_at(self, q, t, zeta1, zeta2):
        """Interpolated control, re-clamped to the tame envelope."""
        u = multilinear(self._axes(), self.U, [t, q, zeta1, zeta2])
        env = self.c_tame * (1.0 + np.abs(np.asarray(q, dtype=float)))
        return np.clip(u, -env, env)

    def extract_control(self, q: float, t: float, stats: SufficientStats) -> float:
        return float(self.control_at(q, t, stats.zeta1, stats.zeta2))

    def bayes_value(self, q0: float) -> float:
        """Expected cost of the optimal Bayesian strategy from q0: S(q0, 0, 0, 0)."""
        if abs(q0) > self.grid.Q:
            raise ConfigError(f"q0={q0} outside the grid [-{self.grid.Q}, {self.grid.Q}]")
        return float(self.value_at(q0, 0.0, 0.0, 0.0))

    # -- persistence: JSON header + raw little-endian float64 payload --

    def save(self, path):
        s_bytes = np.ascontiguousarray(self.S, dtype="<f8").tobytes()
        u_bytes = np.ascontiguousarray(self.U, dtype="<f8").tobytes()
        header = {
            "scheme_version": SCHEME_VERSION,
            "q_axis": self.grid.q_axis.tolist(),
            "zeta1_axis": self.grid.zeta1_axis.tolist(),
            "zeta2_axis": self.grid.zeta2_axis.tolist(),
            "t_axis": self.grid.t_axis.tolist(),
            "prior_atoms": self.prior.atoms.tolist(),
            "prior_weights": self.prior.weights.tolist(),
            "prior_a_max": self.prior.a_max,
            "c_tame": self.c_tame,
            "shape": list(self.S.shape),
            "diagnostics": self.diagnostics,
            "checksum": hashlib.sha256(s_bytes + u_bytes).hexdigest(),
        }
        hdr = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(len(hdr).to_bytes(8, "little"))
            f.write(hdr)
            f.write(s_bytes)
            f.write(u_bytes)

    @classmethod
    def load(cls, path) -> "ValueField":
        try:
            with open(path, "rb") as f:
                if f.read(len(_MAGIC)) != _MAGIC:
                    raise FieldIOError(f"{path}: bad magic")
                hdr_len = int.from_bytes(f.read(8), "little")
                header = json.loads(f.read(hdr_len).decode())
                shape = tuple(header["shape"])
                count = int(np.prod(shape))
                s_bytes = f.read(count * 8)
                u_bytes = f.read(count * 8)
        except OSError as exc:
            raise FieldIOError(str(exc)) from exc
        if hashlib.sha256(s_bytes + u_bytes).hexdigest() != header["checksum"]:
            raise FieldIOError(f"{path}: checksum mismatch")
        grid = SolverGrid(
            q_axis=np.array(header["q_axis"]),
            zeta1_axis=np.array(header["zeta1_axis"]),
            zeta2_axis=np.array(header["zeta2_axis"]),
            t_axis=np.array(header["t_axis"]),
        )
        prior = DiscretePrior(np.array(header["prior_atoms"]),
                              np.array(header["prior_weights"]),
                              header["prior_a_max"])
        S = np.frombuffer(s_bytes, dtype="<f8").reshape(shape).copy()
        U = np.frombuffer(u_bytes, dtype="<f8").reshape(shape).copy()
        return cls(grid=grid, prior=prior, S=S, U=U,
                   c_tame=header["c_tame"], diagnostics=header["diagnostics"])


def solve_bellman(prior: DiscretePrior, grid: SolverGrid, *,
                  c_tame: float | None = None,
                  stability_factor: float = 0.8,
                  reduce_zeta2: bool | str = "auto") -> ValueField:
    """Backward time-stepping of the value PDE from S|_{t=T} = 0.

    reduce_zeta2: "auto" collapses the zeta2 axis to one working slice when
    the posterior mean is zeta2-independent on the grid (exact symmetry);
    True forces it, False always resolves zeta2.
    """
    if c_tame is None:
        c_tame = default_c_tame(prior.a_max)
    if not 0 < stability_factor <= 1:
        raise ConfigError("stability_factor must be in (0, 1]")

    q = grid.q_axis
    z1 = grid.zeta1_axis
    z2 = grid.zeta2_axis
    t_axis = grid.t_axis
    dq, dz1, dz2 = grid.spacings()
    n_q, n_z1, n_z2, n_t = q.size, z1.size, z2.size, t_axis.size

    abar_full = posterior_mean_grid(prior, z1[:, None], z2[None, :])  # (n_z1, n_z2)
    z2_flat = float(np.max(np.ptp(abar_full, axis=1)))
    if reduce_zeta2 == "auto":
        reduce_zeta2 = z2_flat < 1e-12
    elif reduce_zeta2 and z2_flat >= 1e-12:
        raise ConfigError("reduce_zeta2 forced but posterior mean varies with zeta2")

    n_zw = 1 if reduce_zeta2 else n_z2
    abar = abar_full[None, :, :1] if reduce_zeta2 else abar_full[None, :, :]
    qc = q[:, None, None]
    q2 = qc * qc
    env = c_tame * (1.0 + np.abs(qc))

    dt_cfl = stability_factor * grid.cfl_dt(prior.a_max, c_tame)

    S_store = np.empty((n_t, n_q, n_z1, n_z2))
    U_store = np.empty((n_t, n_q, n_z1, n_z2))
    S_store[-1] = 0.0
    U_store[-1] = 0.0

    S = np.zeros((n_q, n_z1, n_zw))
    floored = 0
    clamped = 0
    substeps = 0
    interior_nodes = max(1, (n_q - 2) * (n_z1 - 2) * n_zw)
    interior = (slice(1, -1), slice(1, -1), slice(None))

    def step(S, dt, t_label):
        nonlocal floored, clamped
        Sq = np.gradient(S, dq, axis=0)
        u_raw = -0.5 * Sq
        u = np.clip(u_raw, -env, env)
        clamped += int(np.count_nonzero((np.abs(u_raw) > env)[interior]))
        rhs = (q2 + u * u
               + (abar * qc + u) * _upwind(S, abar * qc + u, dq, 0)
               + abar * q2 * _upwind(S, abar * q2, dz1, 1)
               + 0.5 * _second(S, dq, 0)
               + qc * np.gradient(np.gradient(S, dq, axis=0), dz1, axis=1)
               + 0.5 * q2 * _second(S, dz1, 1))
        if n_zw > 1:
            rhs = rhs + q2 * _upwind(S, q2, dz2, 2)
        S_new = S + dt * rhs
        if not np.all(np.isfinite(S_new)):
            raise DivergenceError(f"non-finite value while stepping toward t={t_label:.6g}")
        # boundary faces: linear extrapolation in q and zeta1, zero normal
        # derivative at the zeta2 top face
        S_new[0] = 2.0 * S_new[1] - S_new[2]
        S_new[-1] = 2.0 * S_new[-2] - S_new[-3]
        S_new[:, 0] = 2.0 * S_new[:, 1] - S_new[:, 2]
        S_new[:, -1] = 2.0 * S_new[:, -2] - S_new[:, -3]
        if n_zw > 1:
            S_new[:, :, -1] = S_new[:, :, -2]
        floored += int(np.count_nonzero(S_new[interior] < 0.0))
        np.maximum(S_new, 0.0, out=S_new)
        return S_new

    def store(k, S):
        u = np.clip(-0.5 * np.gradient(S, dq, axis=0), -env, env)
        S_store[k] = S  # broadcasts over zeta2 when reduced
        U_store[k] = u

    for k in range(n_t - 2, -1, -1):
        interval = t_axis[k + 1] - t_axis[k]
        m = max(1, math.ceil(interval / dt_cfl))
        dt = interval / m
        for _ in range(m):
            S = step(S, dt, t_axis[k])
            substeps += 1
        store(k, S)

    diagnostics = {
        "dt_cfl": dt_cfl,
        "substeps": substeps,
        "floored_nodes": floored,
        "floored_fraction": floored / (interior_nodes * max(substeps, 1)),
        "control_clamped_nodes": clamped,
        "reduced_zeta2": bool(reduce_zeta2),
        "c_tame": c_tame,
    }
    return ValueField(grid=grid, prior=prior, S=S_store, U=U_store,
                      c_tame=c_tame, diagnostics=diagnostics)
