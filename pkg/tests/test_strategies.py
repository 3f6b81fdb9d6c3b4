import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sicampaign import ControlSchedule, ModelParams, Network, named_network, time_grid
from sicampaign.dynamics import integrate_heun, objective
from sicampaign.strategies import (
    InfeasibleBudget,
    bang_bang_schedule,
    bang_bang_strategy,
    bisect_monotone,
    full_intensity_spend,
    no_control,
    schedule_spend,
    static_schedule,
    static_strategy,
)


def test_bisect_finds_root_of_cubic():
    x, fx, its = bisect_monotone(lambda x: x**3, 2.0, 0.0, 2.0, rtol=1e-12)
    assert x == pytest.approx(2 ** (1 / 3), rel=1e-11)
    assert 0 < its <= 200


def test_bisect_endpoints_and_bracketing():
    assert bisect_monotone(lambda x: x, 0.0, 0.0, 1.0)[0] == 0.0
    assert bisect_monotone(lambda x: x, 1.0, 0.0, 1.0)[0] == 1.0
    with pytest.raises(ValueError):
        bisect_monotone(lambda x: x, 2.0, 0.0, 1.0)


def test_static_closed_form_without_word_of_mouth(networks3, defaults, grid):
    # with d = 0 the spend is kappa^2 u_max^2 T, so B = u_max^2 T / 8 gives kappa = 1/sqrt(8)
    params = defaults.with_(d=0.0)
    _, kappa = static_strategy(params, networks3["PL3"], grid)
    assert kappa == pytest.approx(1 / math.sqrt(8), rel=1e-8)


def test_bang_bang_closed_form_without_word_of_mouth(networks3, defaults, grid):
    params = defaults.with_(d=0.0)
    sched, tau = bang_bang_strategy(params, networks3["ER"], grid)
    assert tau == pytest.approx(1 / 8, rel=1e-7)
    # intervals ending at or before tau run at full intensity
    assert np.all(sched.u[1:7] == params.u_max)
    assert np.all(sched.u[8:] == 0.0)


@pytest.mark.parametrize("name", ["ER", "PL3", "PL2"])
@pytest.mark.parametrize("M", [1, 3])
def test_baselines_spend_budget(dists, defaults, grid, name, M):
    net = Network.build(dists[name], M)
    for strategy in (static_strategy, bang_bang_strategy):
        sched, _ = strategy(defaults, net, grid)
        assert sched.within_bounds(defaults)
        assert schedule_spend(defaults, sched, net) == pytest.approx(defaults.B, rel=1e-8)


@pytest.mark.parametrize("name", ["ER", "PL3", "PL2"])
def test_static_beats_bang_bang(networks3, defaults, grid, name):
    net = networks3[name]
    js = objective(integrate_heun(defaults, static_strategy(defaults, net, grid)[0], net), net.dist)
    jb = objective(integrate_heun(defaults, bang_bang_strategy(defaults, net, grid)[0], net), net.dist)
    j0 = objective(integrate_heun(defaults, no_control(3, grid), net), net.dist)
    assert js >= jb > j0


def test_zero_budget_gives_no_control(networks3, defaults, grid):
    params = defaults.with_(B=0.0)
    for strategy in (static_strategy, bang_bang_strategy):
        sched, knob = strategy(params, networks3["ER"], grid)
        assert knob == 0.0
        assert np.all(sched.u == 0) and np.all(sched.v == 0)


def test_budget_at_full_intensity(networks3, defaults, grid):
    net = networks3["PL2"]
    b_full = full_intensity_spend(defaults, net, grid)
    params = defaults.with_(B=b_full)
    _, kappa = static_strategy(params, net, grid)
    _, tau = bang_bang_strategy(params, net, grid)
    assert kappa == 1.0 and tau == 1.0
    with pytest.raises(InfeasibleBudget):
        static_strategy(defaults.with_(B=1.01 * b_full), net, grid)
    with pytest.raises(InfeasibleBudget):
        bang_bang_strategy(defaults.with_(B=1.01 * b_full), net, grid)


def test_bang_bang_boundary_cost_is_proportional(defaults):
    g = time_grid(1.0)
    sched = bang_bang_schedule(0.05, defaults, 2, g)
    # tau sits halfway through interval (0.04, 0.06]
    assert sched.u[3, 0] ** 2 == pytest.approx(0.5 * defaults.u_max**2)
    assert sched.v[3, 0] ** 3 == pytest.approx(0.5 * defaults.v_max**3)
    assert sched.u[0, 0] == sched.u[1, 0] == defaults.u_max


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_spend_monotone_in_knobs(a, b):
    net = Network.build(named_network("ER"), 2)
    params = ModelParams()
    g = time_grid(1.0)
    lo, hi = sorted((a, b))
    assert (schedule_spend(params, static_schedule(lo, params, 2, g), net)
            <= schedule_spend(params, static_schedule(hi, params, 2, g), net) + 1e-18)
    assert (schedule_spend(params, bang_bang_schedule(lo, params, 2, g), net)
            <= schedule_spend(params, bang_bang_schedule(hi, params, 2, g), net) + 1e-18)


def test_no_control_shape(grid):
    sched = no_control(4, grid)
    assert isinstance(sched, ControlSchedule) and sched.u.shape == (51, 4)
