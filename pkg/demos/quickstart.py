"""Two-regime variance gamma firm: collocation PD against the Fourier reference.

    python demos/quickstart.py
"""
import numpy as np

from regime_pd import (RegimeModel, SolverConfig, SwitchingModel, SyncJumpSpec, BasisKind,
                       default_probability, solve, vg_params)
from regime_pd.config import generator_from_persistence
from regime_pd.rbf_basis import CollocationGrid, uniform_grid

k = -0.1                        # log leverage ln(L / V0)
regimes = [RegimeModel(gts=vg_params(0.3227, -0.1576, 0.0306)),
           RegimeModel(gts=vg_params(0.1675, 0.0254, 0.0028))]
q = generator_from_persistence([0.8083, 0.9549])
jumps = SyncJumpSpec.from_rows([0.0132, -0.0117], convention="mean")
model = SwitchingModel.build(regimes, q, jumps)

# uniform grid on [-8, 8], shifted so the barrier falls between two nodes
g = uniform_grid(-8.0, 8.0, 512)
j = int(np.searchsorted(g.nodes, k))
shift = k - 0.5 * (g.nodes[j - 1] + g.nodes[j])
g = CollocationGrid(g.nodes + shift, g.x_min + shift, g.x_max + shift)
h = g.nodes[1] - g.nodes[0]

sol = solve(model, BasisKind("gaussian", 0.5 / h), g, SolverConfig(400, 10.0, k, theta=0.5))

print(" T   regime   collocation   Fourier     rel.err")
for T in (1.0, 2.0, 5.0, 10.0):
    pd = sol.at_time(T, 0.0)[:, 0]
    ref = default_probability(model, T, None, k)
    for r in range(2):
        print(f"{T:4.0f}   {r + 1}     {pd[r]:.8f}   {ref[r]:.8f}   {abs(pd[r] / ref[r] - 1):.1e}")
