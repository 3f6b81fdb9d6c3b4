"""
Spreading without a campaign
============================

"""

from sicampaign import ControlSchedule, ModelParams, Network, integrate_heun, named_network, objective, time_grid

params = ModelParams()          # beta 0.12, alpha 0.5, i0 0.01, T 1
grid = time_grid(params.T)      # 51 points

for name in ("ER", "PL3", "PL2"):
    net = Network.build(named_network(name))
    traj = integrate_heun(params, ControlSchedule.constant(grid, net.M), net)
    # heavier tails spread faster
    print(f"{name}: i(T) = {objective(traj, net.dist):.4f}")
