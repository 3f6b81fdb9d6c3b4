"""
How much does a bigger budget buy?
==================================

"""

from sicampaign import ModelParams, Network, named_network, time_grid
from sicampaign.scenario import swept_params, sweep_point
from sicampaign.transcription_optimizer import SolverOptions

params = ModelParams()
grid = time_grid(params.T)
net = Network.build(named_network("ER"), 3)
opts = SolverOptions(n_starts=2)

print("B/(u_max^2 T)   J_opt    vs static   vs bang-bang")
for b in (0.05, 0.125, 0.25):
    row = sweep_point(swept_params(params, "B", b, net.M, normalized=True), net, grid, opts)
    print(f"{b:>13.3f}  {row.J_opt:.4f}   {row.improvement_vs_static:+6.2f}%   {row.improvement_vs_bang:+6.2f}%")
