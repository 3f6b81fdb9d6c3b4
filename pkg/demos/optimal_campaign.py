"""
Optimal campaign on a power-law network
=======================================

Transcribe the control problem on the 51-point grid, solve it, and look at
where the money goes.
"""

import numpy as np

from sicampaign import ModelParams, Network, integrate_heun, named_network, time_grid
from sicampaign import resource_allocation_rates, solve, transcribe

params = ModelParams()
grid = time_grid(params.T)
net = Network.build(named_network("PL3"), 3)

problem = transcribe(params, net, grid)
print(f"{problem.n_vars} decision variables")
sol = solve(problem)
print(f"J = {sol.J:.5f}, spend = {sol.spend:.6g} (B = {params.B:.6g}), converged: {sol.converged}")
print(f"best start: {sol.start} ({sol.iterations} inner iterations, {sol.elapsed:.1f} s for that start)")

traj = integrate_heun(params, sol.schedule, net)
alloc = resource_allocation_rates(sol, traj, params, net)
print("resource shares (low, medium, high):", np.round(100 * alloc.group_shares, 1))
print(f"word-of-mouth share: {100 * alloc.wom_share:.1f}%")

# controls are front-loaded: compare effort in the two halves
u = sol.schedule.u
print("direct effort, first half vs second half:",
      round(u[grid < 0.5].sum(), 3), round(u[grid > 0.5].sum(), 3))
