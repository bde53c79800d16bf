"""
Reduction to Heston type and back
=================================

The general example gets an auxiliary constant component and a moving frame
on its real-valued coordinate. Simulation runs on the reduced system; the frame
is undone afterwards.
"""

# %%
import numpy as np

from affinepath import load_params
from affinepath.params import classify_heston
from affinepath.reduction import forward_frames, invert_frames, reduce
from affinepath.simulate import SimulationConfig, Simulator

general = load_params("configs/general.toml")
plan = reduce(general)
print(plan.augmented.dim, classify_heston(plan.augmented))
print("frame matrix", plan.frame_matrix)

# %%
sim = Simulator(SimulationConfig(general, np.array([0.5, 0.1]), 1.0, seed=2))
path = sim.sample(0)
print(path.X[::128])

# %%
B = sim.plan.frame_matrix
back = invert_frames(forward_frames(path, B), B)
print(np.abs(back.X - path.X).max())
