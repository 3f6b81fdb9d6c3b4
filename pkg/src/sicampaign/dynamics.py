"""Controlled degree-based SI dynamics, Heun integration, reward and budget spend.

State vectors are indexed by degree class (``k_min .. k_max``); control
vectors by group. Time-indexed arrays are time-major: row ``n`` is ``t_n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .degree_model import (
    DegreeDistribution,
    GroupPartition,
    NeighborDistributions,
    derive_neighbor_distributions,
    partition_equal_mass,
)

DEFAULT_N_POINTS = 51
PROFILE_KINDS = ("constant", "linear_decreasing", "linear_increasing")
_PROFILE_ALIASES = {"decreasing": "linear_decreasing", "increasing": "linear_increasing"}


class NumericalBlowUp(FloatingPointError):
    """Raised when the integrated state stops being finite."""

    def __init__(self, step: int):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


@dataclass(frozen=True)
class SpreadingProfile:
    """Spreading rate over the campaign horizon.

    ``constant`` uses ``beta``; the linear profiles ramp between 0 and
    ``beta_max`` over ``[0, T]``.
    """

    kind: str = "constant"
    beta: float = 0.12
    beta_max: float = 0.24

    def __post_init__(self):
        kind = _PROFILE_ALIASES.get(self.kind, self.kind)
        if kind not in PROFILE_KINDS:
            raise ValueError(f"unknown spreading profile {self.kind!r}")
        if self.beta < 0 or self.beta_max < 0:
            raise ValueError("spreading rates must be nonnegative")
        object.__setattr__(self, "kind", kind)

    def rate(self, t, T: float):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.beta) if t.ndim else float(self.beta)
        frac = t / T
        out = self.beta_max * (1.0 - frac) if self.kind == "linear_decreasing" else self.beta_max * frac
        return out if t.ndim else float(out)

    @property
    def peak(self) -> float:
        return self.beta if self.kind == "constant" else self.beta_max


@dataclass(frozen=True)
class ModelParams:
    """Scalars and cost weights of the campaign problem.

    ``b_hat`` and ``c_hat`` may be scalars or per-group sequences; use
    :meth:`cost_weights` to get arrays of length ``M``. ``B=None`` means the
    default budget ``u_max**2 * T / 8``.
    """

    profile: SpreadingProfile = field(default_factory=SpreadingProfile)
    alpha: float = 0.5
    i0: float = 0.01
    T: float = 1.0
    u_max: float = 0.12
    v_max: float = 0.5
    b_hat: float | Sequence[float] = 1.0
    c_hat: float | Sequence[float] = 1.0
    d: float = 0.5
    B: float | None = None

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 <= self.i0 < 1:
            raise ValueError(f"i0 must lie in [0, 1), got {self.i0}")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if self.u_max < 0 or self.v_max < 0 or self.d < 0:
            raise ValueError("u_max, v_max and d must be nonnegative")
        if self.alpha * (1 + self.v_max) > 1 + 1e-12:
            raise ValueError("alpha * (1 + v_max) must not exceed 1")
        for name in ("b_hat", "c_hat"):
            raw = getattr(self, name)
            w = float(raw) if np.ndim(raw) == 0 else tuple(float(x) for x in raw)
            if np.any(np.asarray(w) < 0):
                raise ValueError(f"{name} must be nonnegative")
            object.__setattr__(self, name, w)
        if self.B is None:
            object.__setattr__(self, "B", self.u_max**2 * self.T / 8)
        if self.B < 0:
            raise ValueError("budget B must be nonnegative")

    def beta(self, t):
        return self.profile.rate(t, self.T)

    def cost_weights(self, M: int) -> tuple[np.ndarray, np.ndarray]:
        out = []
        for w in (self.b_hat, self.c_hat):
            arr = np.full(M, w) if np.ndim(w) == 0 else np.asarray(w, dtype=float)
            if arr.shape != (M,):
                raise ValueError(f"cost weights have length {arr.size}, expected {M}")
            out.append(arr)
        return out[0], out[1]

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class Network:
    """A degree distribution with its neighbor transforms and control partition."""

    dist: DegreeDistribution
    neighbors: NeighborDistributions
    partition: GroupPartition

    @classmethod
    def build(cls, dist: DegreeDistribution, groups: int | GroupPartition = 1) -> "Network":
        part = groups if isinstance(groups, GroupPartition) else partition_equal_mass(dist, groups)
        return cls(dist, derive_neighbor_distributions(dist), part)

    @property
    def degrees(self) -> np.ndarray:
        return self.neighbors.degrees

    @property
    def M(self) -> int:
        return self.partition.n_groups


def time_grid(T: float, n_points: int = DEFAULT_N_POINTS) -> np.ndarray:
    if n_points < 2:
        raise ValueError("a time grid needs at least two points")
    return np.linspace(0.0, T, n_points)


@dataclass(frozen=True)
class ControlSchedule:
    """Control samples ``u[n, m]`` and ``v[n, m]`` on a uniform grid."""

    grid: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("grid must be a 1-d array with at least two points")
        if u.ndim != 2 or u.shape != v.shape or u.shape[0] != grid.size:
            raise ValueError(f"controls must be (n_times, M) arrays, got {u.shape} and {v.shape}")
        steps = np.diff(grid)
        if grid[0] != 0 or np.any(steps <= 0) or np.ptp(steps) > 1e-9 * grid[-1]:
            raise ValueError("grid must start at 0 and be uniform")
        for a in (grid, u, v):
            a.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def constant(cls, grid, M: int, u: float = 0.0, v: float = 0.0) -> "ControlSchedule":
        shape = (len(grid), M)
        return cls(grid, np.full(shape, float(u)), np.full(shape, float(v)))

    @property
    def M(self) -> int:
        return self.u.shape[1]

    @property
    def n_intervals(self) -> int:
        return self.grid.size - 1

    @property
    def dt(self) -> float:
        return float(self.grid[-1] / self.n_intervals)

    def within_bounds(self, params: ModelParams, tol: float = 0.0) -> bool:
        return bool(
            self.u.min() >= -tol
            and self.v.min() >= -tol
            and self.u.max() <= params.u_max + tol
            and self.v.max() <= params.v_max + tol
        )


@dataclass(frozen=True)
class Trajectory:
    """Infected fractions ``i[n, j]`` of degree class ``k_min + j`` at ``t[n]``.

    ``clamp_excess`` is the largest amount by which clamping to ``[0, 1]``
    moved any state component; it is a diagnostic only.
    """

    t: np.ndarray
    i: np.ndarray
    total: np.ndarray
    group_link: np.ndarray
    s_bar: np.ndarray
    clamp_excess: float = 0.0

    def i_at(self, k: int, degrees: np.ndarray) -> np.ndarray:
        return self.i[:, int(k - degrees[0])]


def rhs(state, t: float, u, v, params: ModelParams, network: Network) -> np.ndarray:
    """Time derivative of the per-class infected fractions.

    ``u`` and ``v`` are the per-group control values at time ``t``.
    """
    return _rhs(
        np.asarray(state, dtype=float),
        float(params.beta(t)),
        np.asarray(u, dtype=float),
        np.asarray(v, dtype=float),
        params.alpha,
        network.degrees,
        network.neighbors.q,
        network.partition.class_group,
    )


def _rhs(i, beta, u, v, alpha, k, q, gidx):
    s = 1.0 - i
    # Σ_p (1 + v_p) Σ_{l in K_p} q_l i_l, shared by every class
    pressure = ((1.0 + v)[gidx] * q) @ i
    return (beta * alpha * pressure) * k * s + u[gidx] * s


def heun_forward(params: ModelParams, schedule: ControlSchedule, network: Network, clamp: bool = True):
    """Run the Heun recursion and return ``(states, predictors, f_left, clamp_masks, excess)``.

    The extra arrays are what the discrete adjoint needs; callers that only
    want the trajectory should use :func:`integrate_heun`.
    """
    if schedule.M != network.M:
        raise ValueError(f"schedule has {schedule.M} groups but the partition has {network.M}")
    grid = schedule.grid
    n_steps = schedule.n_intervals
    dt = schedule.dt
    beta = params.beta(grid)
    k = network.degrees
    gidx = network.partition.class_group
    # per-time coefficient vectors, same arithmetic as _rhs
    coupling = network.neighbors.q * (1.0 + schedule.v)[:, gidx]
    spread = beta * params.alpha
    recruit = schedule.u[:, gidx]
    n_cls = k.size

    states = np.empty((n_steps + 1, n_cls))
    predictors = np.empty((n_steps, n_cls))
    f_left = np.empty((n_steps, n_cls))
    masks = np.ones((n_steps, n_cls), dtype=bool)
    states[0] = params.i0
    excess = 0.0

    def f(x, n):
        return (spread[n] * (coupling[n] @ x)) * k * (1.0 - x) + recruit[n] * (1.0 - x)

    for n in range(1, n_steps + 1):
        x = states[n - 1]
        f0 = f(x, n - 1)
        xp = x + dt * f0
        f1 = f(xp, n)
        xn = x + 0.5 * dt * (f0 + f1)
        if not np.isfinite(xn).all():
            raise NumericalBlowUp(n)
        if clamp and (xn.min() < 0.0 or xn.max() > 1.0):
            clipped = np.clip(xn, 0.0, 1.0)
            moved = clipped != xn
            excess = max(excess, float(np.max(np.abs(clipped - xn))))
            masks[n - 1] = ~moved
            xn = clipped
        states[n] = xn
        predictors[n - 1] = xp
        f_left[n - 1] = f0
    return states, predictors, f_left, masks, excess


def aggregates(states: np.ndarray, network: Network):
    """``(total, group_link, s_bar)`` for time-major per-class states."""
    p = network.dist.pmf
    kp = network.degrees * p
    total = states @ p
    group_link = np.stack(
        [states[:, network.partition.class_group == m] @ kp[network.partition.class_group == m] for m in range(network.M)],
        axis=1,
    )
    s_bar = (1.0 - states) @ network.neighbors.r
    return total, group_link, s_bar


def integrate_heun(params: ModelParams, schedule: ControlSchedule, network: Network, clamp: bool = True) -> Trajectory:
    """Integrate the controlled dynamics on the schedule's grid with Heun's method.

    Controls enter the predictor at ``t_{n-1}`` and the corrector at ``t_n``.
    """
    states, _, _, _, excess = heun_forward(params, schedule, network, clamp=clamp)
    total, group_link, s_bar = aggregates(states, network)
    for a in (states, total, group_link, s_bar):
        a.setflags(write=False)
    return Trajectory(schedule.grid, states, total, group_link, s_bar, excess)


def objective(traj: Trajectory, dist: DegreeDistribution) -> float:
    """Final infected fraction ``Σ_k p_k i_k(T)``."""
    return float(traj.i[-1] @ dist.pmf)


def spend_rates(traj: Trajectory, schedule: ControlSchedule, params: ModelParams, network: Network):
    """Instantaneous resource consumption per group at each grid point.

    Returns ``(direct, wom)``, each of shape ``(n_times, M)``.
    """
    b_hat, c_hat = params.cost_weights(network.M)
    beta = params.beta(schedule.grid)
    g = network.partition.masses
    direct = g * b_hat * schedule.u**2
    wom = (
        params.alpha
        * params.d
        * c_hat
        * schedule.v**3
        * (beta * traj.s_bar)[:, None]
        * traj.group_link
    )
    return direct, wom


def budget_spend(traj: Trajectory, schedule: ControlSchedule, params: ModelParams, network: Network) -> float:
    """Right-endpoint Riemann sum of the spend rate over ``n = 1..N``."""
    direct, wom = spend_rates(traj, schedule, params, network)
    return float((direct[1:].sum() + wom[1:].sum()) * schedule.dt)


def lipschitz_bound(params: ModelParams, network: Network) -> float:
    """1-norm Lipschitz constant of the right-hand side in the state."""
    k_max = float(network.degrees[-1])
    return params.u_max + 3.0 * params.profile.peak * k_max**2 * params.alpha * (1 + params.v_max)


def export_trajectory_csv(path, traj: Trajectory, network: Network, classes: Sequence[int] = ()) -> None:
    """CSV with columns ``t, i_total, i_k<k>..., ibar_<m>..., s_bar``."""
    from .io import atomic_csv

    degrees = network.degrees
    cols = [traj.t, traj.total]
    header = ["t", "i_total"]
    for k in classes:
        header.append(f"i_k{k}")
        cols.append(traj.i_at(k, degrees))
    for m in range(network.M):
        header.append(f"ibar_{m + 1}")
        cols.append(traj.group_link[:, m])
    header.append("s_bar")
    cols.append(traj.s_bar)
    atomic_csv(path, header, zip(*cols))


def export_schedule_csv(path, schedule: ControlSchedule) -> None:
    """CSV with columns ``t, u_1..u_M, v_1..v_M``."""
    from .io import atomic_csv

    M = schedule.M
    header = ["t"] + [f"u_{m + 1}" for m in range(M)] + [f"v_{m + 1}" for m in range(M)]
    rows = np.column_stack([schedule.grid, schedule.u, schedule.v])
    atomic_csv(path, header, rows.tolist())
