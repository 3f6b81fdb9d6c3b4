"""Direct transcription of the campaign problem and an augmented-Lagrangian solver.

Decision vector layout (length ``2 * M * (N + 1)``)::

    u_1(t_0..t_N), ..., u_M(t_0..t_N), v_1(t_0..t_N), ..., v_M(t_0..t_N)

The objective is the final infected fraction (maximized), the single equality
constraint is ``spend - B``, and every coordinate is boxed by ``[0, u_max]`` or
``[0, v_max]``. Gradients are exact for the discrete scheme: they are obtained
by reverse accumulation through the Heun recursion and the spend sum.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    ControlSchedule,
    ModelParams,
    Network,
    Trajectory,
    aggregates,
    budget_spend,
    heun_forward,
    integrate_heun,
    objective,
    spend_rates,
)
from .strategies import (
    InfeasibleBudget,
    bang_bang_strategy,
    bisect_monotone,
    full_intensity_spend,
    static_strategy,
)


@dataclass(frozen=True)
class SolverOptions:
    tol_grad: float = 1e-6
    tol_con: float = 1e-8
    max_outer: int = 30
    max_inner: int = 3000
    n_starts: int = 3
    seed: int = 0
    rho0: float = 10.0
    rho_max: float = 1e8


@dataclass
class OptimalSolution:
    schedule: ControlSchedule
    J: float
    spend: float
    multiplier: float
    iterations: int
    kkt_residual: float
    converged: bool
    start: str = ""
    elapsed: float = 0.0
    history: list = field(default_factory=list, repr=False)


class NlpProblem:
    """Finite-dimensional transcription over the sampled control values."""

    def __init__(self, params: ModelParams, network: Network, grid):
        self.params = params
        self.network = network
        self.grid = np.asarray(grid, dtype=float)
        self.M = network.M
        self.n_times = self.grid.size
        block = self.M * self.n_times
        self.n_vars = 2 * block
        self.lower = np.zeros(self.n_vars)
        self.upper = np.concatenate([np.full(block, params.u_max), np.full(block, params.v_max)])
        self.B = float(params.B)
        self._b_hat, self._c_hat = params.cost_weights(self.M)
        self._beta = params.beta(self.grid)
        G = np.zeros((network.degrees.size, self.M))
        G[np.arange(network.degrees.size), network.partition.class_group] = 1.0
        self._onehot = G

    # -- layout -----------------------------------------------------------
    def decode(self, x) -> ControlSchedule:
        x = np.asarray(x, dtype=float)
        half = self.n_vars // 2
        u = x[:half].reshape(self.M, self.n_times).T
        v = x[half:].reshape(self.M, self.n_times).T
        return ControlSchedule(self.grid, u, v)

    def encode(self, schedule: ControlSchedule) -> np.ndarray:
        return np.concatenate([schedule.u.T.ravel(), schedule.v.T.ravel()])

    def project(self, x) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    # -- values -----------------------------------------------------------
    def trajectory(self, x) -> Trajectory:
        return integrate_heun(self.params, self.decode(x), self.network)

    def evaluate(self, x) -> tuple[float, float]:
        """``(J, spend - B)`` at ``x``."""
        schedule = self.decode(x)
        traj = integrate_heun(self.params, schedule, self.network)
        return objective(traj, self.network.dist), budget_spend(traj, schedule, self.params, self.network) - self.B

    def objective(self, x) -> float:
        return self.evaluate(x)[0]

    def constraint(self, x) -> float:
        return self.evaluate(x)[1]

    # -- gradients --------------------------------------------------------
    def _vjp(self, x, n, y, coupling, recruit):
        """Pull back cotangents ``y`` (shape ``(2, K)``) through the RHS at grid index ``n``.

        Returns ``(dx, du_n, dv_n)``.
        """
        k = self.network.degrees
        s = 1.0 - x
        ba = self._beta[n] * self.params.alpha
        h = ba * k * s
        yh = y @ h
        y_x = -y * (ba * (coupling[n] @ x) * k + recruit[n]) + yh[:, None] * coupling[n]
        g_u = (y * s) @ self._onehot
        g_v = yh[:, None] * ((self.network.neighbors.q * x) @ self._onehot)
        return y_x, g_u, g_v

    def value_and_gradient(self, x):
        """Return ``(J, spend - B, dJ/dx, dspend/dx)``."""
        params, net = self.params, self.network
        schedule = self.decode(x)
        u, v = schedule.u, schedule.v
        states, preds, _, masks, _ = heun_forward(params, schedule, net)
        total, group_link, s_bar = aggregates(states, net)
        p = net.dist.pmf
        k = net.degrees
        r = net.neighbors.r
        gidx = net.partition.class_group
        dt = schedule.dt
        beta = self._beta
        N = schedule.n_intervals
        g = net.partition.masses
        coupling = net.neighbors.q * (1.0 + v)[:, gidx]
        recruit = u[:, gidx]

        J = float(states[-1] @ p)
        direct = g * self._b_hat * u[1:] ** 2
        wom_w = params.alpha * params.d * self._c_hat * v**3 * beta[:, None]  # (n_times, M)
        spend = float((direct.sum() + (wom_w[1:] * group_link[1:] * s_bar[1:, None]).sum()) * dt)

        gu = np.zeros((2, N + 1, self.M))
        gv = np.zeros((2, N + 1, self.M))
        gu[1, 1:] = 2.0 * dt * g * self._b_hat * u[1:]
        gv[1, 1:] = (3.0 * dt * params.alpha * params.d * self._c_hat * v[1:] ** 2
                     * beta[1:, None] * group_link[1:] * s_bar[1:, None])

        def running_state_grad(n):
            W = dt * wom_w[n]
            return W[gidx] * k * p * s_bar[n] - r * (W @ group_link[n])

        lam = np.zeros((2, k.size))
        lam[0] = p
        lam[1] = running_state_grad(N)
        for n in range(N, 0, -1):
            mu = lam * masks[n - 1]
            a_f = 0.5 * dt * mu
            mu_xp, du, dv = self._vjp(preds[n - 1], n, a_f, coupling, recruit)
            gu[:, n] += du
            gv[:, n] += dv
            a_f0 = a_f + dt * mu_xp
            mu_x0, du, dv = self._vjp(states[n - 1], n - 1, a_f0, coupling, recruit)
            gu[:, n - 1] += du
            gv[:, n - 1] += dv
            lam = mu + mu_xp + mu_x0
            if n - 1 >= 1:
                lam[1] += running_state_grad(n - 1)

        grads = np.concatenate(
            [gu.transpose(0, 2, 1).reshape(2, -1), gv.transpose(0, 2, 1).reshape(2, -1)], axis=1
        )
        return J, spend - self.B, grads[0], grads[1]

    def gradient(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Exact ``(dJ/dx, d(spend - B)/dx)`` of the discrete transcription."""
        _, _, gJ, gc = self.value_and_gradient(x)
        return gJ, gc


def transcribe(params: ModelParams, network: Network, grid) -> NlpProblem:
    return NlpProblem(params, network, grid)


# -- solver ---------------------------------------------------------------


class _ScaledLagrangian:
    """Augmented Lagrangian in unit-box coordinates ``z = x / upper``.

    Minimizes ``-J + lam * c + rho / 2 * c**2`` with ``c = (spend - B) / B``.
    """

    def __init__(self, problem: NlpProblem):
        self.problem = problem
        self.scale = np.where(problem.upper > 0, problem.upper, 1.0)
        self.hi = np.where(problem.upper > 0, 1.0, 0.0)
        self.cscale = max(problem.B, 1e-12)
        self.n_evals = 0

    def x(self, z):
        return z * self.scale

    def parts(self, z):
        self.n_evals += 1
        J, c, gJ, gc = self.problem.value_and_gradient(self.x(z))
        return J, c / self.cscale, gJ * self.scale, gc * self.scale / self.cscale

    def value(self, z, lam, rho):
        self.n_evals += 1
        J, c = self.problem.evaluate(self.x(z))
        c /= self.cscale
        return -J + lam * c + 0.5 * rho * c * c, J, c

    def project(self, z):
        return np.clip(z, 0.0, self.hi)


def _pg_residual(z, grad, lag: _ScaledLagrangian) -> np.ndarray:
    return z - lag.project(z - grad)


def _spg(lag: _ScaledLagrangian, z, lam, rho, tol, max_iter, memory=10):
    """Spectral projected gradient with nonmonotone backtracking on the unit box."""
    J, c, gJ, gc = lag.parts(z)
    f = -J + lam * c + 0.5 * rho * c * c
    grad = -gJ + (lam + rho * c) * gc
    recent = [f]
    pg = _pg_residual(z, grad, lag)
    step = 1.0 / max(np.max(np.abs(pg)), 1e-12)
    it = 0
    for it in range(1, max_iter + 1):
        if np.linalg.norm(pg) <= tol:
            break
        d = lag.project(z - step * grad) - z
        slope = grad @ d
        if slope >= 0:
            d = -pg
            slope = grad @ d
        f_ref = max(recent)
        t = 1.0
        while True:
            z_new = z + t * d
            f_new, _, _ = lag.value(z_new, lam, rho)
            if f_new <= f_ref + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        J, c, gJ, gc = lag.parts(z_new)
        f_new = -J + lam * c + 0.5 * rho * c * c
        grad_new = -gJ + (lam + rho * c) * gc
        s = z_new - z
        y = grad_new - grad
        sy = s @ y
        step = float(np.clip((s @ s) / sy, 1e-10, 1e10)) if sy > 0 else 1e10
        z, grad, f = z_new, grad_new, f_new
        recent.append(f)
        if len(recent) > memory:
            recent.pop(0)
        pg = _pg_residual(z, grad, lag)
        if t < 1e-12 and np.linalg.norm(s) == 0:
            break
    return z, J, c, grad, it


def _kkt(lag: _ScaledLagrangian, z, lam):
    J, c, gJ, gc = lag.parts(z)
    grad = -gJ + lam * gc
    return float(np.linalg.norm(_pg_residual(z, grad, lag))), J, c


def _feasibility_polish(problem: NlpProblem, x):
    """Scale ``x`` along the ray toward the box corner so that spend hits ``B`` exactly."""
    lo_c = problem.constraint(np.zeros_like(x))
    if lo_c >= 0:
        return np.zeros_like(x)

    def spend_at(s):
        return problem.constraint(problem.project(s * x)) + problem.B

    hi = 1.0
    while spend_at(hi) < problem.B and hi < 1e6:
        hi *= 2.0
    try:
        s, _, _ = bisect_monotone(spend_at, problem.B, 0.0, hi, rtol=1e-12, max_iter=200)
    except ValueError:
        return x
    return problem.project(s * x)


def augmented_lagrangian(problem: NlpProblem, x0, opts: SolverOptions = SolverOptions(), label: str = ""):
    """Solve from a single starting point. Returns an :class:`OptimalSolution`."""
    t_start = time.perf_counter()
    lag = _ScaledLagrangian(problem)
    z = lag.project(np.asarray(x0, dtype=float) / lag.scale)
    tol = opts.tol_grad * np.sqrt(problem.n_vars)
    lam, rho = 0.0, opts.rho0
    c_prev = None
    iterations = 0
    history = []
    for outer in range(opts.max_outer):
        z, J, c, _, inner = _spg(lag, z, lam, rho, tol, opts.max_inner)
        iterations += inner
        lam += rho * c
        kkt, J, c = _kkt(lag, z, lam)
        history.append({"outer": outer, "inner": inner, "J": J, "c": c, "lam": lam, "rho": rho, "kkt": kkt})
        if abs(c) <= opts.tol_con and kkt <= tol:
            break
        if c_prev is not None and abs(c) > 0.25 * abs(c_prev):
            rho = min(rho * 10.0, opts.rho_max)
        c_prev = c
    x = lag.x(z)
    if abs(c) > opts.tol_con:
        x = _feasibility_polish(problem, x)
        z = lag.project(x / lag.scale)
        kkt, J, c = _kkt(lag, z, lam)
    spend = c * lag.cscale + problem.B
    schedule = problem.decode(x)
    return OptimalSolution(
        schedule=schedule,
        J=float(J),
        spend=float(spend),
        multiplier=float(lam / lag.cscale),
        iterations=iterations,
        kkt_residual=float(kkt),
        converged=bool(abs(c) <= opts.tol_con and kkt <= tol),
        start=label,
        elapsed=time.perf_counter() - t_start,
        history=history,
    )


def random_feasible_start(problem: NlpProblem, rng: np.random.Generator) -> np.ndarray:
    """Uniform random controls rescaled along ``s * x`` (clipped) to spend exactly ``B``."""
    base = rng.uniform(0.0, 1.0, problem.n_vars) * problem.upper

    def spend_at(s):
        return problem.constraint(problem.project(s * base)) + problem.B

    hi = 1.0
    while spend_at(hi) < problem.B:
        hi *= 2.0
        if hi > 1e8:
            raise InfeasibleBudget("cannot reach the budget from a random start")
    s, _, _ = bisect_monotone(spend_at, problem.B, 0.0, hi)
    return problem.project(s * base)


def initial_guesses(problem: NlpProblem, opts: SolverOptions):
    params, net, grid = problem.params, problem.network, problem.grid
    starts = [("static", problem.encode(static_strategy(params, net, grid)[0])),
              ("bang_bang", problem.encode(bang_bang_strategy(params, net, grid)[0]))]
    rng = np.random.default_rng(opts.seed)
    for j in range(max(opts.n_starts - 2, 0)):
        starts.append((f"random_{j}", random_feasible_start(problem, rng)))
    return starts[: max(opts.n_starts, 1)]


def solve(problem: NlpProblem, opts: SolverOptions = SolverOptions()) -> OptimalSolution:
    """Multi-start augmented-Lagrangian solve; returns the best feasible local optimum."""
    params = problem.params
    b_full = full_intensity_spend(params, problem.network, problem.grid)
    if params.B > b_full * (1 + 1e-8):
        raise InfeasibleBudget(f"budget {params.B!r} exceeds full-intensity spend {b_full!r}")
    if params.B == 0:
        x = np.zeros(problem.n_vars)
        J, c = problem.evaluate(x)
        return OptimalSolution(problem.decode(x), J, 0.0, 0.0, 0, 0.0, True, start="zero")
    best = None
    for label, x0 in initial_guesses(problem, opts):
        sol = augmented_lagrangian(problem, x0, opts, label)
        if best is None or _better(sol, best, problem.B):
            best = sol
    return best


def _better(a: OptimalSolution, b: OptimalSolution, B: float) -> bool:
    feas_a = abs(a.spend - B) <= 1e-6 * max(B, 1e-12)
    feas_b = abs(b.spend - B) <= 1e-6 * max(B, 1e-12)
    if feas_a != feas_b:
        return feas_a
    if abs(a.J - b.J) <= 1e-10:
        return a.kkt_residual < b.kkt_residual
    return a.J > b.J


@dataclass(frozen=True)
class ResourceAllocation:
    """Per-group spend rates on the grid and their integrated totals."""

    t: np.ndarray
    direct_rate: np.ndarray
    wom_rate: np.ndarray
    direct_total: np.ndarray
    wom_total: np.ndarray

    @property
    def group_total(self) -> np.ndarray:
        return self.direct_total + self.wom_total

    @property
    def total(self) -> float:
        return float(self.group_total.sum())

    @property
    def group_shares(self) -> np.ndarray:
        return self.group_total / self.total

    @property
    def wom_share(self) -> float:
        return float(self.wom_total.sum() / self.total)


def resource_allocation_rates(solution: OptimalSolution | ControlSchedule, traj: Trajectory,
                              params: ModelParams, network: Network) -> ResourceAllocation:
    """Spend rates of a solution (or any schedule) along its trajectory."""
    schedule = solution if isinstance(solution, ControlSchedule) else solution.schedule
    direct, wom = spend_rates(traj, schedule, params, network)
    dt = schedule.dt
    return ResourceAllocation(
        t=schedule.grid,
        direct_rate=direct,
        wom_rate=wom,
        direct_total=direct[1:].sum(axis=0) * dt,
        wom_total=wom[1:].sum(axis=0) * dt,
    )


def export_allocation_csv(path, alloc: ResourceAllocation) -> None:
    """CSV with columns ``t, direct_1..direct_M, wom_1..wom_M``."""
    from .io import atomic_csv

    M = alloc.direct_rate.shape[1]
    header = ["t"] + [f"direct_{m + 1}" for m in range(M)] + [f"wom_{m + 1}" for m in range(M)]
    atomic_csv(path, header, np.column_stack([alloc.t, alloc.direct_rate, alloc.wom_rate]).tolist())
