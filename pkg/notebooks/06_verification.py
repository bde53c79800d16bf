"""
Checking the affine property by Monte Carlo
===========================================

A small run; the acceptance tests use 10^5 samples.
"""

# %%
import numpy as np

from affinepath import load_params
from affinepath.simulate import SimulationConfig
from affinepath.verify import compare_cf, default_u_grid, mc_cf, moment_check, riccati_predictions

p = load_params("configs/jump_cir.toml")
cfg = SimulationConfig(p, np.array([1.0]), 1.0, seed=5)
us = default_u_grid(p.dim)
t_list = [0.25, 0.5, 1.0]

est = mc_cf(cfg, us, t_list, n_samples=2000)
rep = compare_cf(est, riccati_predictions(p, cfg.x0, us, t_list))
for pt in rep.points:
    print(pt.u0, pt.t, round(pt.z, 2))
print("pass" if rep.passed else "fail", rep.p_value)

# %%
m = moment_check(cfg, t_list, n_samples=2000)
print(m.sample_mean[:, 0], m.predicted[:, 0])
