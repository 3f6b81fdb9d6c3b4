"""
Budget-matched baselines
========================

A static campaign runs every control at a fixed fraction ``kappa`` of its
maximum; a bang-bang campaign runs at full power until the money is gone.
"""

from sicampaign import ModelParams, Network, integrate_heun, named_network, objective, time_grid
from sicampaign.strategies import bang_bang_strategy, static_strategy

params = ModelParams()
grid = time_grid(params.T)
net = Network.build(named_network("PL3"), 3)

static, kappa = static_strategy(params, net, grid)
bang, tau = bang_bang_strategy(params, net, grid)
print(f"budget B = {params.B:.4g}")
print(f"static    kappa = {kappa:.4f}  J = {objective(integrate_heun(params, static, net), net.dist):.4f}")
print(f"bang-bang tau   = {tau:.4f}  J = {objective(integrate_heun(params, bang, net), net.dist):.4f}")
