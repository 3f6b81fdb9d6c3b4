import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_spend, rk4_final_state
from sicampaign import ControlSchedule, ModelParams, Network, named_network, time_grid
from sicampaign.degree_model import DegreeDistribution
from sicampaign.dynamics import (
    NumericalBlowUp,
    SpreadingProfile,
    budget_spend,
    export_schedule_csv,
    export_trajectory_csv,
    integrate_heun,
    lipschitz_bound,
    objective,
    rhs,
    spend_rates,
)

# RK4 with 5000 steps, frozen from tests/oracles.py
UNCONTROLLED_FINAL = {"ER": 0.03993165306801346, "PL3": 0.05790887929800322, "PL2": 0.12634167682005637}


def smooth_controls(params):
    u = lambda t: params.u_max * np.array([1 - t, 0.5, t])
    v = lambda t: params.v_max * np.array([t, 1 - t, 0.5])
    return u, v


def sampled(grid, u, v):
    return ControlSchedule(grid, np.array([u(t) for t in grid]), np.array([v(t) for t in grid]))


@pytest.mark.parametrize("name", ["ER", "PL3", "PL2"])
def test_uncontrolled_final_matches_oracle(networks3, defaults, grid, name):
    net = networks3[name]
    traj = integrate_heun(defaults, ControlSchedule.constant(grid, 3), net)
    # Heun at N=50 is second order; its error here is below 2e-3
    assert objective(traj, net.dist) == pytest.approx(UNCONTROLLED_FINAL[name], abs=2e-3)
    assert traj.clamp_excess == 0.0


def test_heun_order_against_rk4(networks3, defaults):
    net = networks3["ER"]
    u, v = smooth_controls(defaults)
    ref = rk4_final_state(net.dist, net.partition, defaults.alpha, defaults.i0, 1.0,
                          lambda t: 0.12, u, v, n_steps=2000)
    errs = []
    for n in (50, 100):
        g = time_grid(1.0, n + 1)
        traj = integrate_heun(defaults, sampled(g, u, v), net)
        errs.append(np.abs(traj.i - ref[:: 2000 // n]).max())
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_single_step_by_hand():
    dist = DegreeDistribution(1, 2, [0.5, 0.5])
    net = Network.build(dist, 1)
    params = ModelParams(alpha=0.5, i0=0.1, profile=SpreadingProfile(beta=1.0))
    g = np.array([0.0, 0.5])
    sched = ControlSchedule(g, [[0.2], [0.4]], [[0.0], [1.0]])
    traj = integrate_heun(params, sched, net)
    # q = (2/3, 0); k = (1, 2)
    x = np.array([0.1, 0.1])

    def f(x, u, v):
        pressure = (1 + v) * (2 / 3) * x[0]
        return 0.5 * pressure * np.array([1, 2]) * (1 - x) + u * (1 - x)

    f0 = f(x, 0.2, 0.0)
    xp = x + 0.5 * f0
    expect = x + 0.25 * (f0 + f(xp, 0.4, 1.0))
    np.testing.assert_allclose(traj.i[1], expect, rtol=1e-14)


def test_rhs_matches_dense_form(networks3, defaults, rng):
    net = networks3["PL3"]
    x = rng.uniform(0, 1, net.degrees.size)
    u = rng.uniform(0, defaults.u_max, 3)
    v = rng.uniform(0, defaults.v_max, 3)
    k = net.degrees
    q = net.neighbors.q
    g = net.partition.class_group
    dense = 0.12 * 0.5 * np.outer(k, q * (1 + v[g])) @ x
    np.testing.assert_allclose(rhs(x, 0.3, u, v, defaults, net), (dense + u[g]) * (1 - x), rtol=1e-12)


def test_fully_infected_is_fixed_point(networks3, defaults, grid):
    net = networks3["ER"]
    params = defaults.with_(i0=0.0)
    sched = ControlSchedule.constant(grid, 3)
    traj = integrate_heun(params, sched, net)
    # i0 = 0 and no recruitment: nothing ever happens
    assert np.all(traj.i == 0.0)
    x = np.ones(net.degrees.size)
    assert np.all(rhs(x, 0.0, np.full(3, 0.12), np.full(3, 0.5), defaults, net) == 0)


def test_alpha_bound_enforced():
    with pytest.raises(ValueError):
        ModelParams(alpha=0.8, v_max=0.5)
    ModelParams(alpha=0.5, v_max=1.0)


def test_profiles():
    dec = SpreadingProfile("decreasing", beta_max=0.24)
    inc = SpreadingProfile("linear_increasing", beta_max=0.24)
    assert dec.kind == "linear_decreasing"
    assert dec.rate(0.0, 1.0) == pytest.approx(0.24) and dec.rate(1.0, 1.0) == 0.0
    assert inc.rate(0.25, 1.0) == pytest.approx(0.06)
    np.testing.assert_allclose(SpreadingProfile().rate(np.array([0, 1.0]), 1.0), 0.12)
    with pytest.raises(ValueError):
        SpreadingProfile("sinusoidal")


def test_default_budget(defaults):
    assert defaults.B == pytest.approx(0.12**2 / 8)
    assert defaults.with_(B=0.0).B == 0.0


def test_blow_up_reported(grid):
    dist = DegreeDistribution(1, 2, [0.5, 0.5])
    net = Network.build(dist, 1)
    params = ModelParams(profile=SpreadingProfile(beta=1e200), i0=0.5)
    with pytest.raises(NumericalBlowUp) as info, np.errstate(over="ignore", invalid="ignore"):
        integrate_heun(params, ControlSchedule.constant(grid, 1), net, clamp=False)
    assert info.value.step >= 1


def test_clamping_records_excess():
    dist = DegreeDistribution(1, 2, [0.5, 0.5])
    net = Network.build(dist, 1)
    params = ModelParams(profile=SpreadingProfile(beta=40.0), i0=0.5)
    g = time_grid(1.0, 3)
    traj = integrate_heun(params, ControlSchedule.constant(g, 1), net)
    assert traj.clamp_excess > 0
    assert traj.i.max() <= 1.0 and traj.i.min() >= 0.0


def test_schedule_validation(grid):
    with pytest.raises(ValueError):
        ControlSchedule(grid, np.zeros((50, 3)), np.zeros((50, 3)))
    with pytest.raises(ValueError):
        ControlSchedule(np.array([0.0, 0.1, 0.5]), np.zeros((3, 1)), np.zeros((3, 1)))
    sched = ControlSchedule.constant(grid, 2, 0.1, 0.2)
    assert sched.dt == pytest.approx(0.02)
    assert not sched.within_bounds(ModelParams(u_max=0.05))


def test_group_count_mismatch(networks3, defaults, grid):
    with pytest.raises(ValueError):
        integrate_heun(defaults, ControlSchedule.constant(grid, 2), networks3["ER"])


@pytest.mark.parametrize("name", ["ER", "PL2"])
def test_spend_matches_brute_force(networks3, defaults, grid, name):
    net = networks3[name]
    u, v = smooth_controls(defaults)
    sched = sampled(grid, u, v)
    params = defaults.with_(b_hat=(1.0, 2.0, 0.5), c_hat=(0.3, 1.0, 3.0))
    traj = integrate_heun(params, sched, net)
    expect = brute_force_spend(traj.i, grid, sched.u, sched.v, net.dist, net.partition,
                               params.alpha, params.d, lambda t: 0.12, params.b_hat, params.c_hat)
    assert budget_spend(traj, sched, params, net) == pytest.approx(expect, rel=1e-12)


def test_direct_spend_closed_form(networks3, defaults, grid):
    net = networks3["PL3"]
    sched = ControlSchedule.constant(grid, 3, u=defaults.u_max)
    traj = integrate_heun(defaults, sched, net)
    # masses sum to one and the sum runs over 50 intervals of 0.02
    assert budget_spend(traj, sched, defaults, net) == pytest.approx(defaults.u_max**2, rel=1e-12)
    direct, wom = spend_rates(traj, sched, defaults, net)
    assert np.all(wom == 0)


controls = st.tuples(
    st.lists(st.floats(0, 0.12), min_size=3, max_size=3),
    st.lists(st.floats(0, 0.5), min_size=3, max_size=3),
    st.lists(st.floats(0, 1), min_size=3, max_size=3),
)


@settings(max_examples=25, deadline=None)
@given(controls)
def test_lipschitz_bound_holds(sample):
    net = Network.build(named_network("ER"), 3)
    params = ModelParams()
    u, v, frac = (np.array(a) for a in sample)
    rng = np.random.default_rng(int(1e6 * frac.sum()))
    x = rng.uniform(0, 1, net.degrees.size)
    y = np.clip(x + rng.normal(0, 0.05, x.size), 0, 1)
    gap = np.abs(rhs(x, 0.5, u, v, params, net) - rhs(y, 0.5, u, v, params, net)).sum()
    assert gap <= lipschitz_bound(params, net) * np.abs(x - y).sum() + 1e-14


@settings(max_examples=15, deadline=None)
@given(controls)
def test_state_monotone_and_bounded(sample):
    net = Network.build(named_network("PL3"), 3)
    params = ModelParams()
    u, v, _ = (np.array(a) for a in sample)
    g = time_grid(1.0)
    traj = integrate_heun(params, ControlSchedule(g, np.tile(u, (51, 1)), np.tile(v, (51, 1))), net)
    assert np.all(np.diff(traj.i, axis=0) >= 0)
    assert traj.i.min() >= params.i0 and traj.i.max() <= 1
    # more control never lowers the final reach
    base = integrate_heun(params, ControlSchedule.constant(g, 3), net)
    assert objective(traj, net.dist) >= objective(base, net.dist) - 1e-15


def test_exports(tmp_path, networks3, defaults, grid):
    net = networks3["ER"]
    sched = ControlSchedule.constant(grid, 3, 0.05, 0.1)
    traj = integrate_heun(defaults, sched, net)
    export_trajectory_csv(tmp_path / "traj.csv", traj, net, classes=[10, 30])
    rows = list(csv.reader(open(tmp_path / "traj.csv")))
    assert rows[0] == ["t", "i_total", "i_k10", "i_k30", "ibar_1", "ibar_2", "ibar_3", "s_bar"]
    assert len(rows) == 52
    assert float(rows[-1][1]) == pytest.approx(objective(traj, net.dist), rel=1e-14)
    export_schedule_csv(tmp_path / "sched.csv", sched)
    rows = list(csv.reader(open(tmp_path / "sched.csv")))
    assert rows[0] == ["t", "u_1", "u_2", "u_3", "v_1", "v_2", "v_3"]
    assert float(rows[1][1]) == 0.05
