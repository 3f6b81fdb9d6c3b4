"""Budget-matched baseline schedules: none, static and bang-bang."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .dynamics import ControlSchedule, ModelParams, Network, budget_spend, integrate_heun

MAX_BISECTIONS = 200
SPEND_RTOL = 1e-8


class InfeasibleBudget(ValueError):
    """The budget exceeds what the campaign can spend at full intensity."""


def bisect_monotone(fn: Callable[[float], float], target: float, lo: float, hi: float,
                    rtol: float = SPEND_RTOL, max_iter: int = MAX_BISECTIONS):
    """Find ``x`` in ``[lo, hi]`` with ``fn(x) ≈ target`` for nondecreasing ``fn``.

    Stops once ``|fn(x) - target| <= rtol * max(|target|, 1e-12)``. Returns
    ``(x, fn(x), iterations)``.
    """
    scale = max(abs(target), 1e-12)
    f_lo, f_hi = fn(lo), fn(hi)
    if abs(f_lo - target) <= rtol * scale:
        return lo, f_lo, 0
    if abs(f_hi - target) <= rtol * scale:
        return hi, f_hi, 0
    if not f_lo < target < f_hi:
        raise ValueError(f"target {target!r} not bracketed by [{f_lo!r}, {f_hi!r}]")
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if abs(f_mid - target) <= rtol * scale:
            return mid, f_mid, it
        if f_mid < target:
            lo = mid
        else:
            hi = mid
    return mid, f_mid, max_iter


def schedule_spend(params: ModelParams, schedule: ControlSchedule, network: Network) -> float:
    return budget_spend(integrate_heun(params, schedule, network), schedule, params, network)


def full_intensity_spend(params: ModelParams, network: Network, grid) -> float:
    """Spend of holding every control at its maximum over the whole horizon."""
    full = ControlSchedule.constant(grid, network.M, params.u_max, params.v_max)
    return schedule_spend(params, full, network)


def _check_budget(params: ModelParams, network: Network, grid) -> float:
    b_full = full_intensity_spend(params, network, grid)
    if params.B > b_full * (1 + SPEND_RTOL):
        raise InfeasibleBudget(f"budget {params.B!r} exceeds full-intensity spend {b_full!r}")
    return b_full


def no_control(M: int, grid) -> ControlSchedule:
    return ControlSchedule.constant(grid, M)


def static_schedule(kappa: float, params: ModelParams, M: int, grid) -> ControlSchedule:
    return ControlSchedule.constant(grid, M, kappa * params.u_max, kappa * params.v_max)


def static_strategy(params: ModelParams, network: Network, grid) -> tuple[ControlSchedule, float]:
    """Constant controls at ``kappa`` times their maxima, ``kappa`` calibrated to spend ``B``."""
    _check_budget(params, network, grid)
    M = network.M
    if params.B == 0:
        return no_control(M, grid), 0.0

    def spend(kappa):
        return schedule_spend(params, static_schedule(kappa, params, M, grid), network)

    kappa, _, _ = bisect_monotone(spend, params.B, 0.0, 1.0)
    return static_schedule(kappa, params, M, grid), kappa


def bang_bang_schedule(tau: float, params: ModelParams, M: int, grid) -> ControlSchedule:
    """Full intensity up to ``tau``, then off.

    Sample ``n >= 1`` stands for the interval ``(t_{n-1}, t_n]``. The sample
    whose interval straddles ``tau`` is scaled so that its cost (quadratic in
    ``u``, cubic in ``v``) is proportional to the covered fraction. Sample 0
    copies sample 1.
    """
    grid = np.asarray(grid, dtype=float)
    dt = grid[1] - grid[0]
    frac = np.clip((tau - grid[:-1]) / dt, 0.0, 1.0)
    frac = np.concatenate(([frac[0]], frac))
    u = params.u_max * np.sqrt(frac)
    v = params.v_max * np.cbrt(frac)
    return ControlSchedule(grid, np.repeat(u[:, None], M, axis=1), np.repeat(v[:, None], M, axis=1))


def bang_bang_strategy(params: ModelParams, network: Network, grid) -> tuple[ControlSchedule, float]:
    """Maximum controls in every group until the budget runs out at switch time ``tau``."""
    _check_budget(params, network, grid)
    M = network.M
    T = float(grid[-1])
    if params.B == 0:
        return no_control(M, grid), 0.0

    def spend(tau):
        return schedule_spend(params, bang_bang_schedule(tau, params, M, grid), network)

    tau, _, _ = bisect_monotone(spend, params.B, 0.0, T)
    return bang_bang_schedule(tau, params, M, grid), tau
